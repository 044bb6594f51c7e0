//! Related-key distinguishers against affine key schedules (boomerangs and
//! iterated differentials), the generic birthday key-collision attack, and
//! a keyless quartet probe used as a null test.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::feistel::{construction_encrypt, Construction, RoundFunctions};
use crate::gf2::{common_kernel, BinMatrix, DomainParams, Word};
use crate::oracles::Direction;
use crate::rkagame::{Budget, Distinguisher, GameOracles};
use crate::schedules::AffineSchedule;

/// Maximum number of confirmation queries the birthday attack spends.
pub const BIRTHDAY_CONFIRMATIONS: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    /// Four-query boomerang: two free top rounds, the rest as bottom trail.
    Thm3,
    /// Boomerang switching in round 3, for five or more rounds.
    Thm4,
    /// Boomerang with a (t−2)-round top trail and two bottom rounds.
    Appb5,
    /// Two-query iterated differential through every round.
    AppbAny,
    /// Key collision between related-key offsets and offline guesses.
    Birthday,
    /// Quartet with zero shifts and a random offset.
    Probe,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::Thm3,
        AttackKind::Thm4,
        AttackKind::Appb5,
        AttackKind::AppbAny,
        AttackKind::Birthday,
        AttackKind::Probe,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Thm3 => "thm3",
            AttackKind::Thm4 => "thm4",
            AttackKind::Appb5 => "appb5",
            AttackKind::AppbAny => "appbany",
            AttackKind::Birthday => "birthday",
            AttackKind::Probe => "probe",
        }
    }

    /// Whether the attack needs an affine KAFw view of the schedule.
    pub fn needs_affine(self) -> bool {
        !matches!(self, AttackKind::Birthday | AttackKind::Probe)
    }
}

/// Which weak offset an attack uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaChoice {
    /// Lowest-valued kernel basis vector.
    #[default]
    Lowest,
    /// Uniform nonzero element of the weak-offset space, per trial.
    Random,
    Fixed(Word),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaintextChoice {
    /// `(0, 0)`.
    #[default]
    Zero,
    Random,
    Fixed(Block),
}

impl PlaintextChoice {
    fn pick(self, p: &DomainParams, rng: &mut ChaCha8Rng) -> Block {
        match self {
            PlaintextChoice::Zero => Block::ZERO,
            PlaintextChoice::Fixed(b) => b,
            PlaintextChoice::Random => Block::new(rng.gen::<Word>() & p.mask(), rng.gen::<Word>() & p.mask()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BirthdayParams {
    /// Number of related-key offsets (`q_e` before confirmation).
    pub offsets: u64,
    /// Number of offline key guesses.
    pub guesses: u64,
    /// Explicit offsets instead of random ones.
    pub planted_offsets: Option<Vec<Word>>,
    /// Explicit guesses instead of random ones.
    pub planted_guesses: Option<Vec<Word>>,
}

impl BirthdayParams {
    pub fn new(offsets: u64, guesses: u64) -> Self {
        Self {
            offsets,
            guesses,
            ..Self::default()
        }
    }

    /// `2^(⌈n/2⌉+1)` offsets and guesses, about `4N` key pairs.
    pub fn default_for(p: &DomainParams) -> Self {
        let q = 1u64 << (p.n().div_ceil(2) + 1).min(p.n());
        Self::new(q, q)
    }

    fn offset_count(&self) -> u64 {
        self.planted_offsets.as_ref().map_or(self.offsets, |v| v.len() as u64)
    }

    fn guess_count(&self) -> u64 {
        self.planted_guesses.as_ref().map_or(self.guesses, |v| v.len() as u64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOptions {
    pub delta: DeltaChoice,
    pub plaintext: PlaintextChoice,
    pub birthday: Option<BirthdayParams>,
}

/// Output of one attack run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub output: bool,
    pub rk_queries: u64,
    pub f_queries: u64,
    pub delta: Option<Word>,
}

/// Nonzero offsets satisfying a set of linear conditions `M·Δ = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakDeltaSpace {
    pub basis: Vec<Word>,
    pub conditions: Vec<(String, BinMatrix)>,
}

impl WeakDeltaSpace {
    pub fn new(n: u32, conditions: Vec<(String, BinMatrix)>) -> Result<Self> {
        let basis = common_kernel(n, conditions.iter().map(|(_, m)| m));
        if basis.is_empty() {
            let names: Vec<&str> = conditions.iter().map(|(s, _)| s.as_str()).collect();
            return Err(Error::NoWeakDelta(format!(
                "only zero is in the kernel of {}",
                names.join(", ")
            )));
        }
        Ok(Self { basis, conditions })
    }

    pub fn contains(&self, delta: Word) -> bool {
        self.conditions.iter().all(|(_, m)| m.apply(delta) == 0)
    }

    pub fn lowest(&self) -> Word {
        *self.basis.iter().min().expect("nonempty basis")
    }

    pub fn random(&self, rng: &mut impl Rng) -> Word {
        loop {
            let v = self
                .basis
                .iter()
                .fold(0, |acc, &b| if rng.gen::<bool>() { acc ^ b } else { acc });
            if v != 0 {
                return v;
            }
        }
    }

    pub fn choose(&self, choice: DeltaChoice, rng: &mut impl Rng) -> Result<Word> {
        match choice {
            DeltaChoice::Lowest => Ok(self.lowest()),
            DeltaChoice::Random => Ok(self.random(rng)),
            DeltaChoice::Fixed(d) if d != 0 && self.contains(d) => Ok(d),
            DeltaChoice::Fixed(d) => Err(Error::InvalidDelta(d)),
        }
    }
}

fn diff(a: &AffineSchedule, i: usize, j: usize) -> (String, BinMatrix) {
    (format!("M{i}+M{j}"), a.round_matrix(i).xor(a.round_matrix(j)))
}

/// Conditions for the differential to pass rounds `3..=last` of the top
/// trail with no active function.
fn top_chain(a: &AffineSchedule, last: usize) -> Vec<(String, BinMatrix)> {
    (3..=last).map(|j| diff(a, j - 2, j)).collect()
}

/// Conditions for the backward differential to pass rounds `first..=t`.
fn bottom_chain(a: &AffineSchedule, first: usize) -> Vec<(String, BinMatrix)> {
    let t = a.rounds();
    (first.max(1)..=t.saturating_sub(2)).map(|j| diff(a, j, j + 2)).collect()
}

fn require_rounds(t: usize, min: usize) -> Result<()> {
    if t < min {
        return Err(Error::TooFewRounds { min, got: t });
    }
    Ok(())
}

/// Weak-offset conditions of each affine attack.
pub fn weak_delta_conditions(kind: AttackKind, a: &AffineSchedule) -> Result<Vec<(String, BinMatrix)>> {
    let t = a.rounds();
    match kind {
        AttackKind::Thm3 => {
            require_rounds(t, 4)?;
            Ok(bottom_chain(a, 3))
        }
        AttackKind::Thm4 => {
            require_rounds(t, 5)?;
            let mut c = vec![diff(a, 1, 5)];
            c.extend(bottom_chain(a, 4));
            Ok(c)
        }
        AttackKind::Appb5 => {
            require_rounds(t, 5)?;
            Ok(top_chain(a, t - 2))
        }
        AttackKind::AppbAny => {
            require_rounds(t, 2)?;
            Ok(top_chain(a, t))
        }
        AttackKind::Birthday | AttackKind::Probe => Ok(Vec::new()),
    }
}

/// Input shifts `∇1, ∇2` and output shifts `∇3, ∇4` for offset `Δ`, plus a
/// base plaintext.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoomerangParams {
    pub delta: Word,
    pub shifts: [Word; 4],
    pub base: Block,
}

impl BoomerangParams {
    /// `∇1 = (M0w⊕M2)Δ`, `∇2 = (M1w⊕M1)Δ`, `∇3 = (M2w⊕Mt)Δ`,
    /// `∇4 = (M3w⊕M_{t−1})Δ`.
    pub fn derive(a: &AffineSchedule, delta: Word, base: Block) -> Self {
        let t = a.rounds();
        let w = |j: usize| a.whitening_matrix(j).apply(delta);
        let m = |i: usize| a.round_matrix(i).apply(delta);
        let second = if t >= 2 { m(2) } else { 0 };
        let before_last = if t >= 2 { m(t - 1) } else { 0 };
        Self {
            delta,
            shifts: [w(0) ^ second, w(1) ^ m(1), w(2) ^ m(t), w(3) ^ before_last],
            base,
        }
    }

    pub fn input_shift(&self) -> Block {
        Block::new(self.shifts[0], self.shifts[1])
    }

    pub fn output_shift(&self) -> Block {
        Block::new(self.shifts[2], self.shifts[3])
    }
}

/// Four queries: encrypt `P` under 0 and `P⊕∇in` under Δ, shift both
/// ciphertexts by `∇out` and decrypt with the offsets swapped. Outputs 1 iff
/// the two recovered plaintexts differ by `∇in`.
pub fn run_quartet(o: &mut dyn GameOracles, b: &BoomerangParams) -> Result<AttackOutcome> {
    let p1 = b.base;
    let c1 = o.rk(0, Direction::Forward, p1)?;
    let c2 = o.rk(b.delta, Direction::Forward, p1 ^ b.input_shift())?;
    let p3 = o.rk(b.delta, Direction::Backward, c1 ^ b.output_shift())?;
    let p4 = o.rk(0, Direction::Backward, c2 ^ b.output_shift())?;
    Ok(AttackOutcome {
        output: p3 ^ p4 == b.input_shift(),
        rk_queries: 4,
        f_queries: 0,
        delta: Some(b.delta),
    })
}

/// Ciphertext difference of the iterated differential: `(M_tΔ⊕M2wΔ,
/// M_{t−1}Δ⊕M3wΔ)`. For even `t` this is `(Δ2⊕M2wΔ, Δ1⊕M3wΔ)`, for odd `t`
/// `(Δ1⊕M2wΔ, Δ2⊕M3wΔ)`, with `Δ1 = M1Δ`, `Δ2 = M2Δ`.
pub fn iterated_output_difference(a: &AffineSchedule, delta: Word) -> Block {
    let t = a.rounds();
    let d1 = a.round_matrix(1).apply(delta);
    let d2 = a.round_matrix(2).apply(delta);
    let (last, before) = if t % 2 == 0 { (d2, d1) } else { (d1, d2) };
    Block::new(
        last ^ a.whitening_matrix(2).apply(delta),
        before ^ a.whitening_matrix(3).apply(delta),
    )
}

/// Two queries: `E_k(P)` and `E_{k⊕Δ}(P⊕∇in)`; outputs 1 iff the
/// ciphertexts differ by the predicted difference.
pub fn run_iterated_differential(
    o: &mut dyn GameOracles,
    delta: Word,
    input_shift: Block,
    output_difference: Block,
    base: Block,
) -> Result<AttackOutcome> {
    let c1 = o.rk(0, Direction::Forward, base)?;
    let c2 = o.rk(delta, Direction::Forward, base ^ input_shift)?;
    Ok(AttackOutcome {
        output: c1 ^ c2 == output_difference,
        rk_queries: 2,
        f_queries: 0,
        delta: Some(delta),
    })
}

/// Round functions backed by the adversary's oracle; the first error is
/// kept and zero is returned after it.
struct OracleRounds<'a> {
    oracles: &'a mut dyn GameOracles,
    calls: u64,
    error: Option<Error>,
}

impl RoundFunctions for OracleRounds<'_> {
    fn eval(&mut self, round: usize, x: Word) -> Word {
        if self.error.is_some() {
            return 0;
        }
        self.calls += 1;
        match self.oracles.f(round, x) {
            Ok(y) => y,
            Err(e) => {
                self.error = Some(e);
                0
            }
        }
    }
}

fn offline_encrypt(
    o: &mut dyn GameOracles,
    c: &Construction,
    key: Word,
    block: Block,
    calls: &mut u64,
) -> Result<Block> {
    let p = o.params();
    let mut fs = OracleRounds {
        oracles: o,
        calls: 0,
        error: None,
    };
    let out = construction_encrypt(&p, c, &mut fs, key, block);
    *calls += fs.calls;
    match fs.error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn distinct_words(rng: &mut ChaCha8Rng, p: &DomainParams, count: u64) -> Result<Vec<Word>> {
    if count > p.size() {
        return Err(Error::QueryBudgetExceeded(format!(
            "{count} distinct values requested from a domain of {}",
            p.size()
        )));
    }
    Ok(index::sample(rng, p.size() as usize, count as usize)
        .into_iter()
        .map(|v| v as Word)
        .collect())
}

/// Queries the fixed plaintext under many offsets, encrypts it offline under
/// many guessed keys, and on a ciphertext match checks the implied key
/// `guess ⊕ offset` on a second plaintext.
pub fn birthday_collision_attack(
    o: &mut dyn GameOracles,
    c: &Construction,
    params: &BirthdayParams,
    plaintext: Block,
    rng: &mut ChaCha8Rng,
) -> Result<AttackOutcome> {
    let p = o.params();
    let offsets = match &params.planted_offsets {
        Some(v) => v.clone(),
        None => distinct_words(rng, &p, params.offsets)?,
    };
    let guesses = match &params.planted_guesses {
        Some(v) => v.clone(),
        None => distinct_words(rng, &p, params.guesses)?,
    };
    let check = Block::new(plaintext.left ^ 1, plaintext.right);
    let mut rk_queries = 0;
    let mut f_calls = 0;
    let mut table: HashMap<Block, Vec<Word>> = HashMap::with_capacity(offsets.len());
    for &d in &offsets {
        let ct = o.rk(d, Direction::Forward, plaintext)?;
        rk_queries += 1;
        table.entry(ct).or_default().push(d);
    }
    let mut confirmed: HashMap<Word, Block> = HashMap::new();
    let mut output = false;
    'guesses: for &g in &guesses {
        let ct = offline_encrypt(o, c, g, plaintext, &mut f_calls)?;
        let Some(candidates) = table.get(&ct) else {
            continue;
        };
        for &d in candidates {
            let real = match confirmed.get(&d) {
                Some(b) => *b,
                None => {
                    if confirmed.len() as u64 >= BIRTHDAY_CONFIRMATIONS {
                        break 'guesses;
                    }
                    let b = o.rk(d, Direction::Forward, check)?;
                    rk_queries += 1;
                    confirmed.insert(d, b);
                    b
                }
            };
            if offline_encrypt(o, c, g, check, &mut f_calls)? == real {
                output = true;
                break 'guesses;
            }
        }
    }
    Ok(AttackOutcome {
        output,
        rk_queries,
        f_queries: f_calls,
        delta: None,
    })
}

/// An attack bound to a public construction, usable in the game harness.
#[derive(Clone, Debug)]
pub struct AttackDistinguisher {
    kind: AttackKind,
    params: DomainParams,
    construction: Construction,
    affine: Option<AffineSchedule>,
    weak: Option<WeakDeltaSpace>,
    options: AttackOptions,
}

impl AttackDistinguisher {
    /// Checks the attack's preconditions against the construction.
    pub fn new(kind: AttackKind, p: DomainParams, construction: Construction, options: AttackOptions) -> Result<Self> {
        let (affine, weak) = if kind.needs_affine() {
            let s = construction.to_kafw()?;
            let a = s.affine(&p)?;
            let weak = WeakDeltaSpace::new(p.n(), weak_delta_conditions(kind, &a)?)?;
            if let DeltaChoice::Fixed(d) = options.delta {
                if d == 0 || !weak.contains(d) {
                    return Err(Error::InvalidDelta(d));
                }
            }
            (Some(a), Some(weak))
        } else {
            (None, None)
        };
        if let DeltaChoice::Fixed(d) = options.delta {
            p.check_word(u64::from(d))?;
            if d == 0 {
                return Err(Error::InvalidDelta(0));
            }
        }
        Ok(Self {
            kind,
            params: p,
            construction,
            affine,
            weak,
            options,
        })
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn weak_space(&self) -> Option<&WeakDeltaSpace> {
        self.weak.as_ref()
    }

    fn birthday_params(&self) -> BirthdayParams {
        self.options
            .birthday
            .clone()
            .unwrap_or_else(|| BirthdayParams::default_for(&self.params))
    }

    /// Runs the attack once and reports the queries it spent.
    pub fn execute(&self, o: &mut dyn GameOracles, rng: &mut ChaCha8Rng) -> Result<AttackOutcome> {
        let p = self.params;
        let base = self.options.plaintext.pick(&p, rng);
        match self.kind {
            AttackKind::Thm3 | AttackKind::Thm4 | AttackKind::Appb5 => {
                let a = self.affine.as_ref().expect("affine attacks keep the schedule");
                let delta = self.weak.as_ref().expect("weak space").choose(self.options.delta, rng)?;
                run_quartet(o, &BoomerangParams::derive(a, delta, base))
            }
            AttackKind::AppbAny => {
                let a = self.affine.as_ref().expect("affine attacks keep the schedule");
                let delta = self.weak.as_ref().expect("weak space").choose(self.options.delta, rng)?;
                let b = BoomerangParams::derive(a, delta, base);
                run_iterated_differential(o, delta, b.input_shift(), iterated_output_difference(a, delta), base)
            }
            AttackKind::Birthday => {
                birthday_collision_attack(o, &self.construction, &self.birthday_params(), base, rng)
            }
            AttackKind::Probe => {
                let delta = match self.options.delta {
                    DeltaChoice::Fixed(d) => d,
                    _ => loop {
                        let d = rng.gen::<Word>() & p.mask();
                        if d != 0 {
                            break d;
                        }
                    },
                };
                run_quartet(
                    o,
                    &BoomerangParams {
                        delta,
                        shifts: [0; 4],
                        base,
                    },
                )
            }
        }
    }
}

impl Distinguisher for AttackDistinguisher {
    fn name(&self) -> String {
        self.kind.as_str().to_string()
    }

    fn budget(&self) -> Budget {
        match self.kind {
            AttackKind::Thm3 | AttackKind::Thm4 | AttackKind::Appb5 | AttackKind::Probe => Budget {
                rk_queries: 4,
                f_queries: 0,
            },
            AttackKind::AppbAny => Budget {
                rk_queries: 2,
                f_queries: 0,
            },
            AttackKind::Birthday => {
                let b = self.birthday_params();
                let t = self.construction.rounds() as u64;
                Budget {
                    rk_queries: b.offset_count() + BIRTHDAY_CONFIRMATIONS,
                    f_queries: (b.guess_count() + BIRTHDAY_CONFIRMATIONS) * t,
                }
            }
        }
    }

    fn run(&self, o: &mut dyn GameOracles, rng: &mut ChaCha8Rng) -> Result<bool> {
        self.execute(o, rng).map(|r| r.output)
    }
}
