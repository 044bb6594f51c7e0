//! Key schedules: sub-key maps, the KAFw / KAFv / Lucifer schedule shapes,
//! conversions between them, and a catalog of named instances.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{half_swap_orthomorphism, AffineMap, BinMatrix, DomainParams, Word};

/// A map from the n-bit master key to an n-bit sub-key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyMap {
    Zero,
    Affine(AffineMap),
    /// `k ↦ m ⊗ k ⊕ k³` over GF(2^n).
    FieldCubic { multiplier: Word },
    /// Explicit lookup table of length `2^n` (n <= 16).
    Table(Vec<Word>),
    /// XOR of the listed maps.
    Xor(Vec<KeyMap>),
}

impl KeyMap {
    pub fn identity(n: u32) -> Self {
        KeyMap::Affine(AffineMap::linear(BinMatrix::identity(n)))
    }

    pub fn linear(matrix: BinMatrix) -> Self {
        KeyMap::Affine(AffineMap::linear(matrix))
    }

    pub fn field_cubic(multiplier: Word) -> Self {
        KeyMap::FieldCubic { multiplier }
    }

    pub fn eval(&self, p: &DomainParams, k: Word) -> Word {
        match self {
            KeyMap::Zero => 0,
            KeyMap::Affine(a) => a.apply(k),
            KeyMap::FieldCubic { multiplier } => p.gf_mul(*multiplier, k) ^ p.gf_cube(k),
            KeyMap::Table(t) => t[k as usize],
            KeyMap::Xor(parts) => parts.iter().fold(0, |acc, m| acc ^ m.eval(p, k)),
        }
    }

    /// XOR of two maps, folding affine parts together where possible.
    pub fn xor(&self, other: &KeyMap) -> KeyMap {
        match (self, other) {
            (KeyMap::Zero, m) | (m, KeyMap::Zero) => m.clone(),
            (KeyMap::Affine(a), KeyMap::Affine(b)) => KeyMap::Affine(a.xor(b)),
            _ => {
                let mut parts = Vec::new();
                for m in [self, other] {
                    match m {
                        KeyMap::Xor(inner) => parts.extend(inner.iter().cloned()),
                        m => parts.push(m.clone()),
                    }
                }
                KeyMap::Xor(parts)
            }
        }
    }

    /// The `(M, C)` form of the map when it is affine. Tables are tested
    /// exhaustively; field-cubic maps are never treated as affine.
    pub fn affine_form(&self, p: &DomainParams) -> Option<AffineMap> {
        let n = p.n();
        match self {
            KeyMap::Zero => Some(AffineMap::zero(n)),
            KeyMap::Affine(a) => Some(a.clone()),
            KeyMap::FieldCubic { .. } => None,
            KeyMap::Table(t) => {
                let c = t[0];
                let m = BinMatrix::from_linear_fn(n, |v| t[v as usize] ^ c);
                let affine = AffineMap::new(m, c);
                (0..t.len() as Word)
                    .all(|k| affine.apply(k) == t[k as usize])
                    .then_some(affine)
            }
            KeyMap::Xor(parts) => parts.iter().try_fold(AffineMap::zero(n), |acc, m| {
                m.affine_form(p).map(|a| acc.xor(&a))
            }),
        }
    }

    /// Checks matrix widths and table sizes against `p`.
    pub fn validate(&self, p: &DomainParams) -> Result<()> {
        match self {
            KeyMap::Zero => Ok(()),
            KeyMap::Affine(a) => {
                if a.matrix.n() != p.n() {
                    return Err(Error::BadMatrix(format!(
                        "matrix has width {} but n = {}",
                        a.matrix.n(),
                        p.n()
                    )));
                }
                p.check_word(u64::from(a.constant)).map(|_| ())
            }
            KeyMap::FieldCubic { multiplier } => p.check_word(u64::from(*multiplier)).map(|_| ()),
            KeyMap::Table(t) => {
                p.require_exhaustive()?;
                if t.len() as u64 != p.size() {
                    return Err(Error::BadMatrix(format!(
                        "table has {} entries, expected {}",
                        t.len(),
                        p.size()
                    )));
                }
                t.iter().try_for_each(|&v| p.check_word(u64::from(v)).map(|_| ()))
            }
            KeyMap::Xor(parts) => parts.iter().try_for_each(|m| m.validate(p)),
        }
    }
}

/// Whitening maps `wf0..wf3` and round-key maps `γ1..γt` of a KAFw cipher.
/// `wf0‖wf1` is the pre-whitening key, `wf2‖wf3` the post-whitening key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySchedule {
    pub whitening: [KeyMap; 4],
    pub rounds: Vec<KeyMap>,
}

impl KeySchedule {
    pub fn new(whitening: [KeyMap; 4], rounds: Vec<KeyMap>) -> Self {
        Self { whitening, rounds }
    }

    /// No whitening keys (the KAF shape).
    pub fn without_whitening(rounds: Vec<KeyMap>) -> Self {
        Self {
            whitening: [KeyMap::Zero, KeyMap::Zero, KeyMap::Zero, KeyMap::Zero],
            rounds,
        }
    }

    pub fn zero(t: usize) -> Self {
        Self::without_whitening(vec![KeyMap::Zero; t])
    }

    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn has_whitening(&self) -> bool {
        self.whitening.iter().any(|m| *m != KeyMap::Zero)
    }

    /// `φ1 = wf1 ⊕ γ1`, the total mask on the first round-function input.
    pub fn phi_first(&self) -> KeyMap {
        self.whitening[1].xor(&self.rounds[0])
    }

    /// `φt = wf2 ⊕ γt`, the total mask on the last round-function input.
    pub fn phi_last(&self) -> KeyMap {
        self.whitening[2].xor(self.rounds.last().expect("at least one round"))
    }

    pub fn validate(&self, p: &DomainParams) -> Result<()> {
        self.whitening
            .iter()
            .chain(&self.rounds)
            .try_for_each(|m| m.validate(p))
    }

    /// Derived sub-keys for master key `k`: `(wk, round keys)`.
    pub fn expand(&self, p: &DomainParams, k: Word) -> ([Word; 4], Vec<Word>) {
        let wk = [0, 1, 2, 3].map(|i| self.whitening[i].eval(p, k));
        let rk = self.rounds.iter().map(|m| m.eval(p, k)).collect();
        (wk, rk)
    }

    pub fn affine(&self, p: &DomainParams) -> Result<AffineSchedule> {
        let form = |m: &KeyMap, label: String| m.affine_form(p).ok_or(Error::NotAffine(label));
        let whitening = [
            form(&self.whitening[0], "wf0".into())?,
            form(&self.whitening[1], "wf1".into())?,
            form(&self.whitening[2], "wf2".into())?,
            form(&self.whitening[3], "wf3".into())?,
        ];
        let rounds = self
            .rounds
            .iter()
            .enumerate()
            .map(|(i, m)| form(m, format!("g{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AffineSchedule { whitening, rounds })
    }
}

/// A KAFw schedule whose every map is affine, in matrix form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSchedule {
    pub whitening: [AffineMap; 4],
    pub rounds: Vec<AffineMap>,
}

impl AffineSchedule {
    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    /// `M_i` for round `i` (1-based).
    pub fn round_matrix(&self, i: usize) -> &BinMatrix {
        &self.rounds[i - 1].matrix
    }

    /// `M_j^(w)` for whitening slot `j` (0..=3).
    pub fn whitening_matrix(&self, j: usize) -> &BinMatrix {
        &self.whitening[j].matrix
    }
}

/// `γ*_0 … γ*_{t+1}` of a t-round KAFv cipher: `γ*_0` whitens the right
/// half on input, `γ*_{t+1}` the left half on output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KafvSchedule {
    pub maps: Vec<KeyMap>,
}

impl KafvSchedule {
    pub fn new(maps: Vec<KeyMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::TooFewRounds { min: 0, got: 0 });
        }
        Ok(Self { maps })
    }

    pub fn rounds(&self) -> usize {
        self.maps.len() - 2
    }

    pub fn validate(&self, p: &DomainParams) -> Result<()> {
        self.maps.iter().try_for_each(|m| m.validate(p))
    }
}

/// Round keys `k1..kt` of a t-round Lucifer-like cipher, all XORed after the
/// round function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LuciferSchedule {
    pub keys: Vec<KeyMap>,
}

impl LuciferSchedule {
    pub fn new(keys: Vec<KeyMap>) -> Self {
        Self { keys }
    }

    pub fn rounds(&self) -> usize {
        self.keys.len()
    }
}

/// Rewrites a t-round KAFv schedule as an equivalent t-round KAFw schedule:
/// odd rounds accumulate `γ*_0, γ*_2, …`, even rounds `γ*_1, γ*_3, …`, the
/// pre-whitening becomes zero and the post-whitening absorbs the rest.
pub fn kafv_to_kafw(s: &KafvSchedule) -> Result<KeySchedule> {
    let t = s.rounds();
    if t < 2 {
        return Err(Error::TooFewRounds { min: 2, got: t });
    }
    let mut rounds: Vec<KeyMap> = Vec::with_capacity(t);
    for j in 0..t {
        // round j+1 adds γ*_j to the running sum two rounds back
        let prev = if j >= 2 { rounds[j - 2].clone() } else { KeyMap::Zero };
        rounds.push(prev.xor(&s.maps[j]));
    }
    let wf2 = rounds[t - 1].xor(&s.maps[t + 1]);
    let wf3 = rounds[t - 2].xor(&s.maps[t]);
    Ok(KeySchedule::new(
        [KeyMap::Zero, KeyMap::Zero, wf2, wf3],
        rounds,
    ))
}

/// A t-round Lucifer cipher seen as keyless first and last rounds around a
/// (t−2)-round KAFv core over the inner round functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LuciferSandwich {
    /// The core uses the same key maps: `γ*_i = k_{i+1}`.
    pub core: KafvSchedule,
    /// Round-function indices (0-based) used by the core.
    pub core_functions: Range<usize>,
    pub first_function: usize,
    pub last_function: usize,
}

pub fn lucifer_strip(s: &LuciferSchedule) -> Result<LuciferSandwich> {
    let t = s.rounds();
    if t < 3 {
        return Err(Error::TooFewRounds { min: 3, got: t });
    }
    Ok(LuciferSandwich {
        core: KafvSchedule { maps: s.keys.clone() },
        core_functions: 1..t - 1,
        first_function: 0,
        last_function: t - 1,
    })
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "minimal4",
    "ortho6",
    "filled6",
    "tweakem4",
    "identity_bad(t)",
    "bitperm_bad5",
];

/// Parameters for the catalog instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuiltinParams {
    /// Field multiplier of the first nonlinear map.
    pub m1: Word,
    /// Field multiplier of the last nonlinear map; must differ from `m1`.
    pub m4: Word,
    /// Round count for `identity_bad`.
    pub rounds: usize,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            m1: 0x2,
            m4: 0x3,
            rounds: 8,
        }
    }
}

/// The half-swap orthomorphism `π(kL‖kR) = kR‖(kL⊕kR)` as a matrix.
pub fn orthomorphism_matrix(p: &DomainParams) -> Result<BinMatrix> {
    if p.n() % 2 != 0 {
        return Err(Error::OddN("ortho".into()));
    }
    let n = p.n();
    Ok(BinMatrix::from_linear_fn(n, |k| half_swap_orthomorphism(n, k)))
}

/// Looks up a named schedule. `identity_bad` also accepts `identity_bad(T)`
/// to override the round count.
pub fn builtin(name: &str, p: &DomainParams, params: &BuiltinParams) -> Result<KeySchedule> {
    let n = p.n();
    let nonlinear_pair = || -> Result<(KeyMap, KeyMap)> {
        let (m1, m4) = (params.m1, params.m4);
        p.check_word(u64::from(m1))?;
        p.check_word(u64::from(m4))?;
        if m1 == 0 || m4 == 0 || m1 == m4 {
            return Err(Error::Unsupported(
                "field multipliers must be distinct and nonzero".into(),
            ));
        }
        Ok((KeyMap::field_cubic(m1), KeyMap::field_cubic(m4)))
    };
    let pi = || orthomorphism_matrix(p).map_err(|_| Error::OddN(name.to_string()));
    match name {
        "minimal4" => {
            let (g1, g4) = nonlinear_pair()?;
            Ok(KeySchedule::without_whitening(vec![g1, KeyMap::Zero, KeyMap::Zero, g4]))
        }
        "tweakem4" => {
            let (w1, w2) = nonlinear_pair()?;
            Ok(KeySchedule::new(
                [KeyMap::Zero, w1, w2, KeyMap::Zero],
                vec![KeyMap::Zero; 4],
            ))
        }
        "ortho6" => {
            let pi = KeyMap::linear(pi()?);
            Ok(KeySchedule::without_whitening(vec![
                KeyMap::identity(n),
                KeyMap::Zero,
                KeyMap::Zero,
                KeyMap::Zero,
                KeyMap::Zero,
                pi,
            ]))
        }
        "filled6" => {
            let pi = KeyMap::linear(pi()?);
            let id = KeyMap::identity(n);
            Ok(KeySchedule::without_whitening(vec![
                id.clone(),
                id.clone(),
                pi.clone(),
                id.clone(),
                id,
                pi,
            ]))
        }
        "bitperm_bad5" => Ok(KeySchedule::without_whitening(
            (1..=5)
                .map(|r| KeyMap::linear(BinMatrix::rotation(n, r)))
                .collect(),
        )),
        "identity_bad" => identity_bad(n, params.rounds),
        other => match other
            .strip_prefix("identity_bad(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|t| t.trim().parse::<usize>().ok())
        {
            Some(t) => identity_bad(n, t),
            None => Err(Error::UnknownName(other.to_string())),
        },
    }
}

fn identity_bad(n: u32, t: usize) -> Result<KeySchedule> {
    if t == 0 {
        return Err(Error::TooFewRounds { min: 1, got: 0 });
    }
    Ok(KeySchedule::without_whitening(vec![KeyMap::identity(n); t]))
}

pub fn random_matrix(n: u32, rng: &mut impl Rng) -> BinMatrix {
    let mask = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    BinMatrix::from_rows(n, (0..n).map(|_| rng.gen::<u32>() & mask).collect())
        .expect("rows are masked to n bits")
}

pub fn random_affine_map(p: &DomainParams, rng: &mut impl Rng) -> KeyMap {
    KeyMap::Affine(AffineMap::new(
        random_matrix(p.n(), rng),
        rng.gen::<u32>() & p.mask(),
    ))
}

/// A t-round KAFw schedule with every map affine and uniformly random.
pub fn random_affine_schedule(p: &DomainParams, t: usize, rng: &mut impl Rng) -> KeySchedule {
    let whitening = [0; 4].map(|_| random_affine_map(p, rng));
    let rounds = (0..t).map(|_| random_affine_map(p, rng)).collect();
    KeySchedule::new(whitening, rounds)
}
