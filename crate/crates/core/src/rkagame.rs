//! The related-key distinguishing game: real and ideal worlds, trial
//! running, advantage estimation and the published advantage bounds.

use std::collections::HashSet;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::feistel::{CipherInstance, Construction, RoundFunctionSet, RoundFunctions};
use crate::gf2::{DomainParams, Word};
use crate::oracles::{derive_seed, Direction, IdealCipherOracle, OracleKind, RelatedKeyOracle, TranscriptRecord};

const KEY_TAG: u64 = 0x004b_4559;
const FUNCTION_TAG: u64 = 0x4655_4e43;
const CIPHER_TAG: u64 = 0x4943;
const ADVERSARY_TAG: u64 = 0x0041_4456;
const REAL_TAG: u64 = 0x5245_414c;
const IDEAL_TAG: u64 = 0x0049_4445_414c;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldKind {
    Real,
    Ideal,
}

impl WorldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WorldKind::Real => "real",
            WorldKind::Ideal => "ideal",
        }
    }

    fn tag(self) -> u64 {
        match self {
            WorldKind::Real => REAL_TAG,
            WorldKind::Ideal => IDEAL_TAG,
        }
    }
}

/// Everything needed to build either world for one trial.
#[derive(Clone, Debug)]
pub struct WorldSpec {
    pub params: DomainParams,
    pub construction: Construction,
    pub oracle_kind: OracleKind,
    /// Independent function per round instead of one shared function.
    pub per_round: bool,
}

impl WorldSpec {
    pub fn new(params: DomainParams, construction: Construction, oracle_kind: OracleKind, per_round: bool) -> Self {
        Self {
            params,
            construction,
            oracle_kind,
            per_round,
        }
    }

    pub fn rounds(&self) -> usize {
        self.construction.rounds()
    }

    fn functions(&self, seed: u64) -> RoundFunctionSet {
        RoundFunctionSet::sample(self.oracle_kind, self.per_round, self.rounds(), seed, self.params.n())
    }
}

/// Declared query limits of a distinguisher.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub rk_queries: u64,
    pub f_queries: u64,
}

impl Budget {
    pub const UNLIMITED: Budget = Budget {
        rk_queries: u64::MAX,
        f_queries: u64::MAX,
    };
}

/// The adversary's view of a world: the related-key oracle and the round
/// functions.
pub trait GameOracles {
    fn params(&self) -> DomainParams;
    /// Number of round-function indices the adversary may address.
    fn rounds(&self) -> usize;
    fn rk(&mut self, delta: Word, direction: Direction, block: Block) -> Result<Block>;
    fn f(&mut self, round: usize, x: Word) -> Result<Word>;
}

pub trait Distinguisher: Sync {
    fn name(&self) -> String;
    fn budget(&self) -> Budget;
    fn run(&self, oracles: &mut dyn GameOracles, rng: &mut ChaCha8Rng) -> Result<bool>;
}

/// Always answers the same bit without querying.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDistinguisher(pub bool);

impl Distinguisher for ConstantDistinguisher {
    fn name(&self) -> String {
        format!("constant{}", u8::from(self.0))
    }

    fn budget(&self) -> Budget {
        Budget {
            rk_queries: 0,
            f_queries: 0,
        }
    }

    fn run(&self, _: &mut dyn GameOracles, _: &mut ChaCha8Rng) -> Result<bool> {
        Ok(self.0)
    }
}

enum Backend {
    Real(RelatedKeyOracle<CipherInstance>),
    Ideal {
        rk: RelatedKeyOracle<IdealCipherOracle>,
        functions: RoundFunctionSet,
    },
}

/// One world instance with budget enforcement, redundancy rejection and an
/// optional transcript.
pub struct GameSession {
    params: DomainParams,
    rounds: usize,
    backend: Backend,
    budget: Budget,
    rk_seen: HashSet<(Word, Direction, Block)>,
    f_seen: HashSet<(usize, Word)>,
    transcript: Option<Vec<TranscriptRecord>>,
}

impl GameSession {
    /// Samples the master key and all oracles of `kind` from `seed`.
    pub fn new(spec: &WorldSpec, kind: WorldKind, seed: u64, budget: Budget) -> Result<Self> {
        let p = spec.params;
        let key = derive_seed(seed, KEY_TAG, 0) as Word & p.mask();
        let functions = spec.functions(derive_seed(seed, FUNCTION_TAG, 0));
        let backend = match kind {
            WorldKind::Real => Backend::Real(RelatedKeyOracle::new(
                key,
                CipherInstance::new(p, spec.construction.clone(), functions)?,
            )),
            WorldKind::Ideal => Backend::Ideal {
                rk: RelatedKeyOracle::new(key, IdealCipherOracle::new(derive_seed(seed, CIPHER_TAG, 0), p)),
                functions,
            },
        };
        Ok(Self {
            params: p,
            rounds: spec.rounds(),
            backend,
            budget,
            rk_seen: HashSet::new(),
            f_seen: HashSet::new(),
            transcript: None,
        })
    }

    pub fn record_transcript(&mut self) {
        self.transcript.get_or_insert_with(Vec::new);
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    pub fn rk_queries(&self) -> u64 {
        match &self.backend {
            Backend::Real(o) => o.query_count(),
            Backend::Ideal { rk, .. } => rk.query_count(),
        }
    }

    /// Distinct `(function, input)` pairs queried by the adversary.
    pub fn f_queries(&self) -> u64 {
        self.f_seen.len() as u64
    }

    fn function_set(&self) -> &RoundFunctionSet {
        match &self.backend {
            Backend::Real(o) => o.backend().functions(),
            Backend::Ideal { functions, .. } => functions,
        }
    }
}

impl GameOracles for GameSession {
    fn params(&self) -> DomainParams {
        self.params
    }

    fn rounds(&self) -> usize {
        self.rounds
    }

    fn rk(&mut self, delta: Word, direction: Direction, block: Block) -> Result<Block> {
        let p = self.params;
        p.check_word(u64::from(delta))?;
        if !block.fits(&p) {
            return Err(Error::ValueOutOfRange {
                value: block.pack(p.n()),
                bits: 2 * p.n(),
            });
        }
        if !self.rk_seen.insert((delta, direction, block)) {
            return Err(Error::RedundantQuery {
                delta,
                direction: direction.as_str(),
                block: block.pack(p.n()),
            });
        }
        if self.rk_queries() >= self.budget.rk_queries {
            return Err(Error::QueryBudgetExceeded(format!(
                "more than {} related-key queries",
                self.budget.rk_queries
            )));
        }
        let out = match &mut self.backend {
            Backend::Real(o) => o.query(delta, direction, block),
            Backend::Ideal { rk, .. } => rk.query(delta, direction, block),
        };
        if let Some(t) = &mut self.transcript {
            t.push(TranscriptRecord::related_key(&p, delta, direction, block, out));
        }
        Ok(out)
    }

    fn f(&mut self, round: usize, x: Word) -> Result<Word> {
        let p = self.params;
        p.check_word(u64::from(x))?;
        if round >= self.rounds {
            return Err(Error::ValueOutOfRange {
                value: round as u64,
                bits: 0,
            });
        }
        let index = self.function_set().function_index(round);
        if self.f_seen.insert((index, x)) && self.f_seen.len() as u64 > self.budget.f_queries {
            return Err(Error::QueryBudgetExceeded(format!(
                "more than {} function queries",
                self.budget.f_queries
            )));
        }
        let y = match &mut self.backend {
            Backend::Real(o) => o.backend_mut().functions_mut().eval(round, x),
            Backend::Ideal { functions, .. } => functions.eval(round, x),
        };
        if let Some(t) = &mut self.transcript {
            t.push(TranscriptRecord::function(&p, index, x, y));
        }
        Ok(y)
    }
}

/// Result of one trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub world: WorldKind,
    pub seed: u64,
    pub output: bool,
    pub rk_queries: u64,
    pub f_queries: u64,
}

fn adversary_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, ADVERSARY_TAG, 0))
}

/// Runs `d` once in a freshly sampled world. Deterministic per
/// `(d, spec, kind, seed)`.
pub fn run_trial(d: &dyn Distinguisher, spec: &WorldSpec, kind: WorldKind, seed: u64) -> Result<TrialRecord> {
    let mut session = GameSession::new(spec, kind, seed, d.budget())?;
    let output = d.run(&mut session, &mut adversary_rng(seed))?;
    Ok(TrialRecord {
        world: kind,
        seed,
        output,
        rk_queries: session.rk_queries(),
        f_queries: session.f_queries(),
    })
}

/// [`run_trial`] keeping the full query transcript.
pub fn run_trial_with_transcript(
    d: &dyn Distinguisher,
    spec: &WorldSpec,
    kind: WorldKind,
    seed: u64,
) -> Result<(TrialRecord, Vec<TranscriptRecord>)> {
    let mut session = GameSession::new(spec, kind, seed, d.budget())?;
    session.record_transcript();
    let output = d.run(&mut session, &mut adversary_rng(seed))?;
    let record = TrialRecord {
        world: kind,
        seed,
        output,
        rk_queries: session.rk_queries(),
        f_queries: session.f_queries(),
    };
    Ok((record, session.transcript().to_vec()))
}

/// Seed of trial `index` in world `kind`.
pub fn trial_seed(base_seed: u64, kind: WorldKind, index: u64) -> u64 {
    derive_seed(base_seed, kind.tag(), index)
}

/// Output-1 frequency of a distinguisher in one world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldEstimate {
    pub world: WorldKind,
    pub trials: u64,
    pub ones: u64,
    pub mean_rk_queries: f64,
    pub mean_f_queries: f64,
    pub max_rk_queries: u64,
}

impl WorldEstimate {
    pub fn frequency(&self) -> f64 {
        self.ones as f64 / self.trials as f64
    }
}

pub fn estimate_world(
    d: &dyn Distinguisher,
    spec: &WorldSpec,
    kind: WorldKind,
    trials: u64,
    base_seed: u64,
) -> Result<WorldEstimate> {
    if trials == 0 {
        return Err(Error::Unsupported("at least one trial is required".into()));
    }
    let records = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(d, spec, kind, trial_seed(base_seed, kind, i)))
        .collect::<Result<Vec<_>>>()?;
    let ones = records.iter().filter(|r| r.output).count() as u64;
    let rk: u64 = records.iter().map(|r| r.rk_queries).sum();
    let f: u64 = records.iter().map(|r| r.f_queries).sum();
    Ok(WorldEstimate {
        world: kind,
        trials,
        ones,
        mean_rk_queries: rk as f64 / trials as f64,
        mean_f_queries: f as f64 / trials as f64,
        max_rk_queries: records.iter().map(|r| r.rk_queries).max().unwrap_or(0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub p_real: f64,
    pub p_ideal: f64,
    pub advantage: f64,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: f64,
    pub trials_real: u64,
    pub trials_ideal: u64,
    pub mean_rk_queries: f64,
    pub mean_f_queries: f64,
}

impl AdvantageEstimate {
    pub fn from_worlds(real: &WorldEstimate, ideal: &WorldEstimate) -> Self {
        let (pr, pi) = (real.frequency(), ideal.frequency());
        let var = pr * (1.0 - pr) / real.trials as f64 + pi * (1.0 - pi) / ideal.trials as f64;
        let total = (real.trials + ideal.trials) as f64;
        Self {
            p_real: pr,
            p_ideal: pi,
            advantage: (pr - pi).abs(),
            ci_halfwidth: 1.96 * var.sqrt(),
            trials_real: real.trials,
            trials_ideal: ideal.trials,
            mean_rk_queries: (real.mean_rk_queries * real.trials as f64
                + ideal.mean_rk_queries * ideal.trials as f64)
                / total,
            mean_f_queries: (real.mean_f_queries * real.trials as f64
                + ideal.mean_f_queries * ideal.trials as f64)
                / total,
        }
    }
}

/// Runs `trials` independent trials in each world.
pub fn estimate_advantage(
    d: &dyn Distinguisher,
    spec: &WorldSpec,
    trials: u64,
    base_seed: u64,
) -> Result<AdvantageEstimate> {
    estimate_advantage_split(d, spec, trials, trials, base_seed)
}

pub fn estimate_advantage_split(
    d: &dyn Distinguisher,
    spec: &WorldSpec,
    real_trials: u64,
    ideal_trials: u64,
    base_seed: u64,
) -> Result<AdvantageEstimate> {
    let real = estimate_world(d, spec, WorldKind::Real, real_trials, base_seed)?;
    let ideal = estimate_world(d, spec, WorldKind::Ideal, ideal_trials, base_seed)?;
    Ok(AdvantageEstimate::from_worlds(&real, &ideal))
}

/// The four published advantage bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Four rounds, permutations, nonlinear schedule.
    Perm4,
    /// Four rounds, random functions, nonlinear schedule.
    Func4,
    /// Six rounds, permutations, affine schedule.
    Perm6,
    /// Six rounds, random functions, affine schedule.
    Func6,
}

impl Theorem {
    pub fn from_number(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Theorem::Perm4),
            2 => Ok(Theorem::Func4),
            5 => Ok(Theorem::Perm6),
            6 => Ok(Theorem::Func6),
            other => Err(Error::UnknownName(format!("theorem {other}"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Theorem::Perm4 => 1,
            Theorem::Func4 => 2,
            Theorem::Perm6 => 5,
            Theorem::Func6 => 6,
        }
    }

    pub fn uses_deltas(self) -> bool {
        matches!(self, Theorem::Perm4 | Theorem::Func4)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: u32,
    pub numerator: u128,
    pub denominator: u128,
    pub value: f64,
    /// Whether the query-count precondition of the theorem holds.
    pub precondition_holds: bool,
    /// The bound exceeds 1 and says nothing.
    pub vacuous: bool,
}

/// Evaluates a published bound. `delta_counts` holds `(δ1·N, δ2·N, δ3·N)`
/// and is ignored for the six-round theorems.
pub fn bound_formula(theorem: Theorem, q_f: u64, q_e: u64, n: u32, delta_counts: (u64, u64, u64)) -> BoundReport {
    let (qf, qe) = (u128::from(q_f), u128::from(q_e));
    let size = 1u128 << n;
    let (d1, d2, d3) = (
        u128::from(delta_counts.0),
        u128::from(delta_counts.1),
        u128::from(delta_counts.2),
    );
    let numerator = match theorem {
        Theorem::Perm4 => 2 * d1 * qe * qf + (d2 + d3) * qe * qe + 8 * qe * qf + 27 * qe * qe + 4 * qe,
        Theorem::Func4 => 2 * d1 * qe * qf + (d2 + d3) * qe * qe + 2 * qe * qf + 7 * qe * qe,
        Theorem::Perm6 => 14 * qe * qf + 57 * qe * qe + 4 * qe,
        Theorem::Func6 => 6 * qe * qf + 18 * qe * qe,
    };
    let precondition_holds = match theorem {
        Theorem::Perm4 => 2 * (qf + 2 * qe) <= size,
        Theorem::Perm6 => 2 * (qf + 4 * qe) <= size,
        Theorem::Func4 | Theorem::Func6 => true,
    };
    let r = Ratio::new(numerator, size);
    BoundReport {
        theorem: theorem.number(),
        numerator: *r.numer(),
        denominator: *r.denom(),
        value: numerator as f64 / size as f64,
        precondition_holds,
        vacuous: numerator > size,
    }
}
