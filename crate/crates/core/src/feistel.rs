//! Feistel round maps and the KAFw / KAF / KAFv / Lucifer constructions.

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::gf2::{DomainParams, Word};
use crate::oracles::{derive_seed, BlockCipherBackend, FunctionOracle, OracleKind};
use crate::schedules::{kafv_to_kafw, KafvSchedule, KeyMap, KeySchedule, LuciferSchedule};

/// Access to the round functions of a cipher. `round` is 0-based.
pub trait RoundFunctions {
    fn eval(&mut self, round: usize, x: Word) -> Word;
}

/// Adapts a closure into [`RoundFunctions`].
pub struct FnRounds<F>(pub F);

impl<F: FnMut(usize, Word) -> Word> RoundFunctions for FnRounds<F> {
    fn eval(&mut self, round: usize, x: Word) -> Word {
        (self.0)(round, x)
    }
}

/// Shifts round indices, so that an inner chain of rounds can reuse the
/// functions of an enclosing cipher.
pub struct OffsetRounds<'a, R: ?Sized> {
    pub inner: &'a mut R,
    pub offset: usize,
}

impl<R: RoundFunctions + ?Sized> RoundFunctions for OffsetRounds<'_, R> {
    fn eval(&mut self, round: usize, x: Word) -> Word {
        self.inner.eval(round + self.offset, x)
    }
}

/// Either one function shared by all rounds or one per round.
#[derive(Clone, Debug)]
pub enum RoundFunctionSet {
    Single(FunctionOracle),
    PerRound(Vec<FunctionOracle>),
}

impl RoundFunctionSet {
    /// Fresh random functions (or permutations), seeded from `seed`.
    pub fn sample(kind: OracleKind, per_round: bool, rounds: usize, seed: u64, n: u32) -> Self {
        if per_round {
            RoundFunctionSet::PerRound(
                (0..rounds)
                    .map(|i| FunctionOracle::sample(kind, derive_seed(seed, 0x46, i as u64), n))
                    .collect(),
            )
        } else {
            RoundFunctionSet::Single(FunctionOracle::sample(kind, derive_seed(seed, 0x46, 0), n))
        }
    }

    pub fn is_single(&self) -> bool {
        matches!(self, RoundFunctionSet::Single(_))
    }

    /// Number of distinct functions.
    pub fn len(&self) -> usize {
        match self {
            RoundFunctionSet::Single(_) => 1,
            RoundFunctionSet::PerRound(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the function used at `round`.
    pub fn function_index(&self, round: usize) -> usize {
        match self {
            RoundFunctionSet::Single(_) => 0,
            RoundFunctionSet::PerRound(_) => round,
        }
    }
}

impl RoundFunctions for RoundFunctionSet {
    fn eval(&mut self, round: usize, x: Word) -> Word {
        match self {
            RoundFunctionSet::Single(f) => f.eval(x),
            RoundFunctionSet::PerRound(fs) => fs[round].eval(x),
        }
    }
}

/// `Ψ_k^f(L‖R) = R ‖ L ⊕ f(k ⊕ R)`.
pub fn psi_round(state: Block, round_key: Word, f: impl FnOnce(Word) -> Word) -> Block {
    Block::new(state.right, state.left ^ f(round_key ^ state.right))
}

/// Inverse of [`psi_round`]; queries `f` forward only.
pub fn psi_round_inverse(state: Block, round_key: Word, f: impl FnOnce(Word) -> Word) -> Block {
    Block::new(state.right ^ f(round_key ^ state.left), state.left)
}

/// `Ψ̃_k^f(L‖R) = R ‖ L ⊕ f(R) ⊕ k`.
pub fn psi_tilde_round(state: Block, round_key: Word, f: impl FnOnce(Word) -> Word) -> Block {
    Block::new(state.right, state.left ^ f(state.right) ^ round_key)
}

pub fn psi_tilde_round_inverse(state: Block, round_key: Word, f: impl FnOnce(Word) -> Word) -> Block {
    Block::new(state.right ^ f(state.left) ^ round_key, state.left)
}

/// The (post-round) state and function I/O of one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub input: Word,
    pub output: Word,
    pub state: Block,
}

/// Intermediate values of one KAFw encryption.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub plaintext: Block,
    pub rounds: Vec<RoundTrace>,
    pub ciphertext: Block,
}

fn whitening_keys(p: &DomainParams, s: &KeySchedule, key: Word) -> (Block, Block) {
    let w = |i: usize| s.whitening[i].eval(p, key);
    (Block::new(w(0), w(1)), Block::new(w(2), w(3)))
}

/// `wk_out ⊕ Ψ_{γt} ∘ … ∘ Ψ_{γ1}(wk_in ⊕ W)`.
pub fn kafw_encrypt(
    p: &DomainParams,
    s: &KeySchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    plaintext: Block,
) -> Block {
    let (wk_in, wk_out) = whitening_keys(p, s, key);
    let mut state = plaintext ^ wk_in;
    for (i, g) in s.rounds.iter().enumerate() {
        state = psi_round(state, g.eval(p, key), |x| fs.eval(i, x));
    }
    state ^ wk_out
}

pub fn kafw_decrypt(
    p: &DomainParams,
    s: &KeySchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    ciphertext: Block,
) -> Block {
    let (wk_in, wk_out) = whitening_keys(p, s, key);
    let mut state = ciphertext ^ wk_out;
    for (i, g) in s.rounds.iter().enumerate().rev() {
        state = psi_round_inverse(state, g.eval(p, key), |x| fs.eval(i, x));
    }
    state ^ wk_in
}

pub fn kafw_encrypt_traced(
    p: &DomainParams,
    s: &KeySchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    plaintext: Block,
) -> TraceRecord {
    let (wk_in, wk_out) = whitening_keys(p, s, key);
    let mut state = plaintext ^ wk_in;
    let mut rounds = Vec::with_capacity(s.rounds());
    for (i, g) in s.rounds.iter().enumerate() {
        let input = g.eval(p, key) ^ state.right;
        let output = fs.eval(i, input);
        state = Block::new(state.right, state.left ^ output);
        rounds.push(RoundTrace { input, output, state });
    }
    TraceRecord {
        plaintext,
        rounds,
        ciphertext: state ^ wk_out,
    }
}

/// Recomputes the ciphertext from the recorded function outputs alone and
/// checks that each recorded input is the one the schedule implies.
pub fn replay_trace(p: &DomainParams, s: &KeySchedule, key: Word, trace: &TraceRecord) -> Option<Block> {
    if trace.rounds.len() != s.rounds() {
        return None;
    }
    let (wk_in, wk_out) = whitening_keys(p, s, key);
    let mut state = trace.plaintext ^ wk_in;
    for (g, r) in s.rounds.iter().zip(&trace.rounds) {
        if g.eval(p, key) ^ state.right != r.input {
            return None;
        }
        state = Block::new(state.right, state.left ^ r.output);
        if state != r.state {
            return None;
        }
    }
    Some(state ^ wk_out)
}

/// `(γ*_{t+1}‖0) ⊕ Ψ̃_{γ*_t} ∘ … ∘ Ψ̃_{γ*_1}((0‖γ*_0) ⊕ W)`.
pub fn kafv_encrypt(
    p: &DomainParams,
    s: &KafvSchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    plaintext: Block,
) -> Block {
    let t = s.rounds();
    let mut state = plaintext ^ Block::new(0, s.maps[0].eval(p, key));
    for i in 0..t {
        state = psi_tilde_round(state, s.maps[i + 1].eval(p, key), |x| fs.eval(i, x));
    }
    state ^ Block::new(s.maps[t + 1].eval(p, key), 0)
}

pub fn kafv_decrypt(
    p: &DomainParams,
    s: &KafvSchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    ciphertext: Block,
) -> Block {
    let t = s.rounds();
    let mut state = ciphertext ^ Block::new(s.maps[t + 1].eval(p, key), 0);
    for i in (0..t).rev() {
        state = psi_tilde_round_inverse(state, s.maps[i + 1].eval(p, key), |x| fs.eval(i, x));
    }
    state ^ Block::new(0, s.maps[0].eval(p, key))
}

/// `Ψ̃_{kt}^{ft} ∘ … ∘ Ψ̃_{k1}^{f1}(W)`.
pub fn lucifer_encrypt(
    p: &DomainParams,
    s: &LuciferSchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    plaintext: Block,
) -> Result<Block> {
    if s.rounds() < 2 {
        return Err(Error::TooFewRounds { min: 2, got: s.rounds() });
    }
    let mut state = plaintext;
    for (i, k) in s.keys.iter().enumerate() {
        state = psi_tilde_round(state, k.eval(p, key), |x| fs.eval(i, x));
    }
    Ok(state)
}

pub fn lucifer_decrypt(
    p: &DomainParams,
    s: &LuciferSchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    ciphertext: Block,
) -> Result<Block> {
    if s.rounds() < 2 {
        return Err(Error::TooFewRounds { min: 2, got: s.rounds() });
    }
    let mut state = ciphertext;
    for (i, k) in s.keys.iter().enumerate().rev() {
        state = psi_tilde_round_inverse(state, k.eval(p, key), |x| fs.eval(i, x));
    }
    Ok(state)
}

/// The Lucifer cipher evaluated as keyless outer rounds around a KAFv core
/// over the inner functions `f2..f_{t−1}`.
pub fn lucifer_encrypt_sandwich(
    p: &DomainParams,
    s: &LuciferSchedule,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    plaintext: Block,
) -> Result<Block> {
    let t = s.rounds();
    if t < 2 {
        return Err(Error::TooFewRounds { min: 2, got: t });
    }
    let core = KafvSchedule { maps: s.keys.clone() };
    let state = psi_tilde_round(plaintext, 0, |x| fs.eval(0, x));
    let state = kafv_encrypt(p, &core, &mut OffsetRounds { inner: &mut *fs, offset: 1 }, key, state);
    Ok(psi_tilde_round(state, 0, |x| fs.eval(t - 1, x)))
}

/// Which cipher shape an instance evaluates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "construction", content = "schedule")]
pub enum Construction {
    Kafw(KeySchedule),
    Kaf(Vec<KeyMap>),
    Kafv(KafvSchedule),
    Lucifer(LuciferSchedule),
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self {
            Construction::Kafw(_) => "kafw",
            Construction::Kaf(_) => "kaf",
            Construction::Kafv(_) => "kafv",
            Construction::Lucifer(_) => "lucifer",
        }
    }

    /// Number of round-function evaluations per encryption.
    pub fn rounds(&self) -> usize {
        match self {
            Construction::Kafw(s) => s.rounds(),
            Construction::Kaf(r) => r.len(),
            Construction::Kafv(s) => s.rounds(),
            Construction::Lucifer(s) => s.rounds(),
        }
    }

    /// The equivalent KAFw schedule, when one exists.
    pub fn to_kafw(&self) -> Result<KeySchedule> {
        match self {
            Construction::Kafw(s) => Ok(s.clone()),
            Construction::Kaf(r) => Ok(KeySchedule::without_whitening(r.clone())),
            Construction::Kafv(s) => kafv_to_kafw(s),
            Construction::Lucifer(_) => Err(Error::Unsupported(
                "Lucifer ciphers have no KAFw schedule over the same functions".into(),
            )),
        }
    }

    fn validate(&self, p: &DomainParams) -> Result<()> {
        match self {
            Construction::Kafw(s) => s.validate(p),
            Construction::Kaf(r) => r.iter().try_for_each(|m| m.validate(p)),
            Construction::Kafv(s) => s.validate(p),
            Construction::Lucifer(s) => {
                if s.rounds() < 2 {
                    return Err(Error::TooFewRounds { min: 2, got: s.rounds() });
                }
                s.keys.iter().try_for_each(|m| m.validate(p))
            }
        }
    }
}

/// Encrypts under any construction with caller-supplied round functions.
/// Lucifer schedules with fewer than two rounds are evaluated round by round
/// without the arity check.
pub fn construction_encrypt(
    p: &DomainParams,
    c: &Construction,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    block: Block,
) -> Block {
    match c {
        Construction::Kafw(s) => kafw_encrypt(p, s, fs, key, block),
        Construction::Kaf(r) => {
            let mut state = block;
            for (i, g) in r.iter().enumerate() {
                state = psi_round(state, g.eval(p, key), |x| fs.eval(i, x));
            }
            state
        }
        Construction::Kafv(s) => kafv_encrypt(p, s, fs, key, block),
        Construction::Lucifer(s) => {
            let mut state = block;
            for (i, k) in s.keys.iter().enumerate() {
                state = psi_tilde_round(state, k.eval(p, key), |x| fs.eval(i, x));
            }
            state
        }
    }
}

pub fn construction_decrypt(
    p: &DomainParams,
    c: &Construction,
    fs: &mut (impl RoundFunctions + ?Sized),
    key: Word,
    block: Block,
) -> Block {
    match c {
        Construction::Kafw(s) => kafw_decrypt(p, s, fs, key, block),
        Construction::Kaf(r) => {
            let mut state = block;
            for (i, g) in r.iter().enumerate().rev() {
                state = psi_round_inverse(state, g.eval(p, key), |x| fs.eval(i, x));
            }
            state
        }
        Construction::Kafv(s) => kafv_decrypt(p, s, fs, key, block),
        Construction::Lucifer(s) => {
            let mut state = block;
            for (i, k) in s.keys.iter().enumerate().rev() {
                state = psi_tilde_round_inverse(state, k.eval(p, key), |x| fs.eval(i, x));
            }
            state
        }
    }
}

/// A concrete cipher: construction, domain and round functions.
#[derive(Clone, Debug)]
pub struct CipherInstance {
    params: DomainParams,
    construction: Construction,
    functions: RoundFunctionSet,
}

impl CipherInstance {
    pub fn new(params: DomainParams, construction: Construction, functions: RoundFunctionSet) -> Result<Self> {
        construction.validate(&params)?;
        if let RoundFunctionSet::PerRound(fs) = &functions {
            if fs.len() != construction.rounds() {
                return Err(Error::ScheduleArityMismatch {
                    expected: fs.len(),
                    schedule: construction.rounds(),
                });
            }
        }
        Ok(Self {
            params,
            construction,
            functions,
        })
    }

    /// A KAFw instance that requires exactly `t` rounds.
    pub fn kafw(params: DomainParams, t: usize, schedule: KeySchedule, functions: RoundFunctionSet) -> Result<Self> {
        if schedule.rounds() != t {
            return Err(Error::ScheduleArityMismatch {
                expected: t,
                schedule: schedule.rounds(),
            });
        }
        Self::new(params, Construction::Kafw(schedule), functions)
    }

    pub fn params(&self) -> DomainParams {
        self.params
    }

    pub fn rounds(&self) -> usize {
        self.construction.rounds()
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn functions(&self) -> &RoundFunctionSet {
        &self.functions
    }

    pub fn functions_mut(&mut self) -> &mut RoundFunctionSet {
        &mut self.functions
    }

    pub fn encrypt(&mut self, key: Word, block: Block) -> Block {
        construction_encrypt(&self.params, &self.construction, &mut self.functions, key, block)
    }

    pub fn decrypt(&mut self, key: Word, block: Block) -> Block {
        construction_decrypt(&self.params, &self.construction, &mut self.functions, key, block)
    }

    /// Round-by-round trace; only defined for constructions with a KAFw form.
    pub fn encrypt_traced(&mut self, key: Word, block: Block) -> Result<TraceRecord> {
        let s = self.construction.to_kafw()?;
        Ok(kafw_encrypt_traced(&self.params, &s, &mut self.functions, key, block))
    }
}

impl BlockCipherBackend for CipherInstance {
    fn params(&self) -> DomainParams {
        self.params
    }

    fn encrypt(&mut self, key: Word, block: Block) -> Block {
        CipherInstance::encrypt(self, key, block)
    }

    fn decrypt(&mut self, key: Word, block: Block) -> Block {
        CipherInstance::decrypt(self, key, block)
    }
}

/// `E_{k⊕tweak}` over a fixed base cipher and master key.
#[derive(Clone, Debug)]
pub struct TweakableCipher {
    pub base: CipherInstance,
    pub key: Word,
}

impl TweakableCipher {
    pub fn new(base: CipherInstance, key: Word) -> Self {
        Self { base, key }
    }

    pub fn encrypt(&mut self, tweak: Word, block: Block) -> Block {
        self.base.encrypt(self.key ^ tweak, block)
    }

    pub fn decrypt(&mut self, tweak: Word, block: Block) -> Block {
        self.base.decrypt(self.key ^ tweak, block)
    }
}
