//! Exhaustive checks that two descriptions of a cipher agree on every key
//! and plaintext.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::feistel::{kafv_encrypt, kafw_encrypt, lucifer_encrypt, lucifer_encrypt_sandwich, RoundFunctionSet};
use crate::gf2::{DomainParams, Word};
use crate::oracles::{derive_seed, OracleKind};
use crate::schedules::{kafv_to_kafw, random_affine_map, KafvSchedule, KeyMap, KeySchedule, LuciferSchedule};

/// Widest domain swept exhaustively (`2^(3n)` key/plaintext pairs).
pub const MAX_EQUIVALENCE_WIDTH: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalencePair {
    /// KAFv against KAFw under the converted schedule.
    KafvKafw,
    /// Lucifer against keyless outer rounds around a KAFv core.
    LuciferSandwich,
    /// KAF with equal round keys against `(k‖k) ⊕ π((k‖k) ⊕ W)`.
    KacCollapse,
}

impl EquivalencePair {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kafv-kafw" => Ok(EquivalencePair::KafvKafw),
            "lucifer-sandwich" => Ok(EquivalencePair::LuciferSandwich),
            "kac-collapse" => Ok(EquivalencePair::KacCollapse),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EquivalencePair::KafvKafw => "kafv-kafw",
            EquivalencePair::LuciferSandwich => "lucifer-sandwich",
            EquivalencePair::KacCollapse => "kac-collapse",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub pair: EquivalencePair,
    pub n: u32,
    pub rounds: usize,
    pub seed: u64,
    pub cases: u64,
    pub mismatches: u64,
    /// First disagreeing `(key, plaintext)`, if any.
    pub first_mismatch: Option<(Word, Block)>,
}

/// A random map mixing an affine part with, half the time, a field cubic.
fn random_map(p: &DomainParams, rng: &mut ChaCha8Rng) -> KeyMap {
    let affine = random_affine_map(p, rng);
    if rng.gen::<bool>() {
        affine.xor(&KeyMap::field_cubic(rng.gen::<Word>() & p.mask()))
    } else {
        affine
    }
}

fn sweep(p: &DomainParams, mut check: impl FnMut(Word, Block) -> bool) -> (u64, u64, Option<(Word, Block)>) {
    let mut cases = 0;
    let mut bad = 0;
    let mut first = None;
    for key in 0..p.size() as Word {
        for w in 0..p.size() * p.size() {
            let w = Block::unpack(w, p.n());
            cases += 1;
            if !check(key, w) {
                bad += 1;
                first.get_or_insert((key, w));
            }
        }
    }
    (cases, bad, first)
}

/// Checks one pair for one seed over every key and plaintext.
pub fn check_equivalence(pair: EquivalencePair, p: &DomainParams, rounds: usize, seed: u64) -> Result<EquivalenceReport> {
    if p.n() > MAX_EQUIVALENCE_WIDTH {
        return Err(Error::Unsupported(format!(
            "exhaustive equivalence sweeps need n <= {MAX_EQUIVALENCE_WIDTH}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4551, 0));
    let fn_seed = derive_seed(seed, 0x4551, 1);
    let (cases, mismatches, first_mismatch) = match pair {
        EquivalencePair::KafvKafw => {
            let s = KafvSchedule::new((0..rounds + 2).map(|_| random_map(p, &mut rng)).collect())?;
            let w = kafv_to_kafw(&s)?;
            let mut fs = RoundFunctionSet::sample(OracleKind::Function, true, rounds, fn_seed, p.n());
            sweep(p, |k, x| {
                kafv_encrypt(p, &s, &mut fs, k, x) == kafw_encrypt(p, &w, &mut fs, k, x)
            })
        }
        EquivalencePair::LuciferSandwich => {
            let s = LuciferSchedule::new((0..rounds).map(|_| random_map(p, &mut rng)).collect());
            let mut fs = RoundFunctionSet::sample(OracleKind::Function, true, rounds, fn_seed, p.n());
            lucifer_encrypt(p, &s, &mut fs, 0, Block::ZERO)?;
            sweep(p, |k, x| {
                lucifer_encrypt(p, &s, &mut fs, k, x).ok() == lucifer_encrypt_sandwich(p, &s, &mut fs, k, x).ok()
            })
        }
        EquivalencePair::KacCollapse => {
            let m = random_map(p, &mut rng);
            let s = KeySchedule::without_whitening(vec![m.clone(); rounds]);
            let keyless = KeySchedule::zero(rounds);
            let mut fs = RoundFunctionSet::sample(OracleKind::Function, false, rounds, fn_seed, p.n());
            sweep(p, |k, x| {
                let rk = m.eval(p, k);
                let kk = Block::new(rk, rk);
                kafw_encrypt(p, &s, &mut fs, k, x) == kk ^ kafw_encrypt(p, &keyless, &mut fs, 0, kk ^ x)
            })
        }
    };
    Ok(EquivalenceReport {
        pair,
        n: p.n(),
        rounds,
        seed,
        cases,
        mismatches,
        first_mismatch,
    })
}

/// [`check_equivalence`] over several seeds, in parallel.
pub fn check_equivalence_seeds(
    pair: EquivalencePair,
    p: &DomainParams,
    rounds: usize,
    seeds: &[u64],
) -> Result<Vec<EquivalenceReport>> {
    seeds
        .par_iter()
        .map(|&s| check_equivalence(pair, p, rounds, s))
        .collect()
}
