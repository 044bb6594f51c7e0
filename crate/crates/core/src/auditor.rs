//! Exhaustive key-schedule audits: uniformity / AXU / cross-uniformity
//! counts of the masking maps and the matrix conditions for affine schedules.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feistel::Construction;
use crate::gf2::{AffineMap, BinMatrix, DomainParams, Word};
use crate::schedules::{KafvSchedule, KeyMap, KeySchedule};

/// Count threshold under which a 4-round schedule is reported as good-like.
pub const DEFAULT_THRESHOLD: u64 = 3;

/// Evaluates `phi` on every n-bit key.
pub fn tabulate(p: &DomainParams, phi: impl Fn(Word) -> Word) -> Result<Vec<Word>> {
    p.require_exhaustive()?;
    Ok((0..p.size() as Word).map(phi).collect())
}

fn max_bucket(n: usize, values: impl Iterator<Item = Word>) -> u64 {
    let mut counts = vec![0u32; n];
    let mut best = 0;
    for v in values {
        let c = &mut counts[v as usize];
        *c += 1;
        best = best.max(*c);
    }
    u64::from(best)
}

/// `max_y |{k : φ(k) = y}|`.
pub fn measure_uniformity(p: &DomainParams, phi: impl Fn(Word) -> Word) -> Result<u64> {
    let table = tabulate(p, phi)?;
    Ok(max_bucket(table.len(), table.iter().copied()))
}

/// `max_{a≠0, b} |{k : φ(k⊕a) ⊕ φ(k) = b}|`.
pub fn measure_axu(p: &DomainParams, phi: impl Fn(Word) -> Word) -> Result<u64> {
    let table = tabulate(p, phi)?;
    let size = table.len();
    Ok((1..size)
        .into_par_iter()
        .map(|a| max_bucket(size, (0..size).map(|k| table[k ^ a] ^ table[k])))
        .max()
        .unwrap_or(0))
}

/// `max_{a, y} |{k : φ1(k) ⊕ φ4(k⊕a) = y}|`, including `a = 0`.
pub fn measure_cross_uniformity(
    p: &DomainParams,
    phi1: impl Fn(Word) -> Word,
    phi4: impl Fn(Word) -> Word,
) -> Result<u64> {
    let t1 = tabulate(p, phi1)?;
    let t4 = tabulate(p, phi4)?;
    let size = t1.len();
    Ok((0..size)
        .into_par_iter()
        .map(|a| max_bucket(size, (0..size).map(|k| t1[k] ^ t4[k ^ a])))
        .max()
        .unwrap_or(0))
}

/// Which condition set an audit evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditCheck {
    /// Four-round KAFw counts on `φ1 = wf1⊕γ1`, `φ4 = wf2⊕γ4`.
    Def1,
    /// Six-round affine KAFw conditions.
    Def3,
    /// KAF without whitening: counts at four rounds, matrices at six.
    Cor1,
    /// KAFv: counts on `γ*_0, γ*_5` at four rounds, matrices at six.
    Cor2,
}

impl AuditCheck {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "def1" => Ok(AuditCheck::Def1),
            "def3" => Ok(AuditCheck::Def3),
            "cor1" => Ok(AuditCheck::Cor1),
            "cor2" => Ok(AuditCheck::Cor2),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AuditCheck::Def1 => "def1",
            AuditCheck::Def3 => "def3",
            AuditCheck::Cor1 => "cor1",
            AuditCheck::Cor2 => "cor2",
        }
    }
}

/// Exact counts (each is δ·N) for the first and last masking maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaCounts {
    pub delta1_first: u64,
    pub delta1_last: u64,
    pub delta2_first: u64,
    pub delta2_last: u64,
    pub delta3: u64,
}

impl DeltaCounts {
    pub fn delta1(&self) -> u64 {
        self.delta1_first.max(self.delta1_last)
    }

    pub fn delta2(&self) -> u64 {
        self.delta2_first.max(self.delta2_last)
    }

    pub fn delta3(&self) -> u64 {
        self.delta3
    }

    pub fn within(&self, threshold: u64) -> bool {
        self.delta1() <= threshold && self.delta2() <= threshold && self.delta3 <= threshold
    }
}

/// An invertibility requirement on one matrix, with a kernel vector when it
/// fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCondition {
    pub name: String,
    pub invertible: bool,
    pub witness: Option<Word>,
}

impl MatrixCondition {
    fn of(name: &str, m: &BinMatrix) -> Self {
        let witness = m.kernel_basis().first().copied();
        Self {
            name: name.to_string(),
            invertible: witness.is_none(),
            witness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub check: AuditCheck,
    pub n: u32,
    pub rounds: usize,
    pub counts: Option<DeltaCounts>,
    pub threshold: Option<u64>,
    pub matrix_conditions: Vec<MatrixCondition>,
    pub passed: bool,
}

impl AuditReport {
    fn from_counts(check: AuditCheck, p: &DomainParams, counts: DeltaCounts, threshold: u64) -> Self {
        Self {
            check,
            n: p.n(),
            rounds: 4,
            counts: Some(counts),
            threshold: Some(threshold),
            matrix_conditions: Vec::new(),
            passed: counts.within(threshold),
        }
    }

    fn from_matrices(check: AuditCheck, p: &DomainParams, conditions: Vec<MatrixCondition>) -> Self {
        let passed = conditions.iter().all(|c| c.invertible);
        Self {
            check,
            n: p.n(),
            rounds: 6,
            counts: None,
            threshold: None,
            matrix_conditions: conditions,
            passed,
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let size = 1u64 << self.n;
        writeln!(f, "check: {}", self.check.as_str())?;
        writeln!(f, "n: {}  rounds: {}", self.n, self.rounds)?;
        if let Some(c) = &self.counts {
            writeln!(f, "delta1*N: {} (first {}, last {}) of {size}", c.delta1(), c.delta1_first, c.delta1_last)?;
            writeln!(f, "delta2*N: {} (first {}, last {}) of {size}", c.delta2(), c.delta2_first, c.delta2_last)?;
            writeln!(f, "delta3*N: {} of {size}", c.delta3)?;
            if let Some(t) = self.threshold {
                writeln!(f, "threshold: {t}")?;
            }
        }
        for c in &self.matrix_conditions {
            match c.witness {
                None => writeln!(f, "{}: invertible", c.name)?,
                Some(w) => writeln!(f, "{}: singular, kernel witness {:#x}", c.name, w)?,
            }
        }
        write!(f, "verdict: {}", if self.passed { "pass" } else { "fail" })
    }
}

fn require_rounds(t: usize, expected: usize) -> Result<()> {
    if t != expected {
        return Err(Error::ScheduleArityMismatch { expected, schedule: t });
    }
    Ok(())
}

/// δ counts for an arbitrary pair of masking maps.
pub fn measure_pair(p: &DomainParams, first: &KeyMap, last: &KeyMap) -> Result<DeltaCounts> {
    p.require_exhaustive()?;
    let f = |k| first.eval(p, k);
    let l = |k| last.eval(p, k);
    Ok(DeltaCounts {
        delta1_first: measure_uniformity(p, f)?,
        delta1_last: measure_uniformity(p, l)?,
        delta2_first: measure_axu(p, f)?,
        delta2_last: measure_axu(p, l)?,
        delta3: measure_cross_uniformity(p, f, l)?,
    })
}

/// Four-round KAFw: counts for `φ1 = wf1⊕γ1` and `φ4 = wf2⊕γ4`.
pub fn check_definition1(p: &DomainParams, s: &KeySchedule, threshold: u64) -> Result<AuditReport> {
    require_rounds(s.rounds(), 4)?;
    let counts = measure_pair(p, &s.phi_first(), &s.phi_last())?;
    Ok(AuditReport::from_counts(AuditCheck::Def1, p, counts, threshold))
}

/// Four-round KAF: counts for `γ1` and `γ4`.
pub fn check_corollary1_nl(p: &DomainParams, rounds: &[KeyMap], threshold: u64) -> Result<AuditReport> {
    require_rounds(rounds.len(), 4)?;
    let counts = measure_pair(p, &rounds[0], &rounds[3])?;
    Ok(AuditReport::from_counts(AuditCheck::Cor1, p, counts, threshold))
}

fn affine(p: &DomainParams, m: &KeyMap, name: &str) -> Result<AffineMap> {
    m.affine_form(p).ok_or_else(|| Error::NotAffine(name.to_string()))
}

fn six_round_conditions(
    first: &BinMatrix,
    last: &BinMatrix,
    inner: [(&str, BinMatrix); 2],
) -> Vec<MatrixCondition> {
    let mut out = vec![
        MatrixCondition::of("phi1", first),
        MatrixCondition::of("phi6", last),
        MatrixCondition::of("phi1+phi6", &first.xor(last)),
    ];
    out.extend(inner.iter().map(|(name, m)| MatrixCondition::of(name, m)));
    out
}

/// Six-round affine KAFw: `φ1`, `φ6`, `φ1⊕φ6` bijective, `M1⊕M3` and
/// `M4⊕M6` invertible.
pub fn check_definition3(p: &DomainParams, s: &KeySchedule) -> Result<AuditReport> {
    require_rounds(s.rounds(), 6)?;
    let a = s.affine(p)?;
    let first = a.whitening_matrix(1).xor(a.round_matrix(1));
    let last = a.whitening_matrix(2).xor(a.round_matrix(6));
    let conditions = six_round_conditions(
        &first,
        &last,
        [
            ("M1+M3", a.round_matrix(1).xor(a.round_matrix(3))),
            ("M4+M6", a.round_matrix(4).xor(a.round_matrix(6))),
        ],
    );
    Ok(AuditReport::from_matrices(AuditCheck::Def3, p, conditions))
}

/// Six-round affine KAF: [`check_definition3`] with zero whitening.
pub fn check_corollary1_affine(p: &DomainParams, rounds: &[KeyMap]) -> Result<AuditReport> {
    let mut r = check_definition3(p, &KeySchedule::without_whitening(rounds.to_vec()))?;
    r.check = AuditCheck::Cor1;
    Ok(r)
}

/// KAFv: four rounds audits `γ*_0, γ*_5` counts; six rounds requires
/// `γ*_0`, `γ*_7`, their sum bijective and `M*_2`, `M*_5` invertible.
pub fn check_corollary2(p: &DomainParams, s: &KafvSchedule, threshold: u64) -> Result<AuditReport> {
    match s.rounds() {
        4 => {
            let counts = measure_pair(p, &s.maps[0], &s.maps[5])?;
            Ok(AuditReport::from_counts(AuditCheck::Cor2, p, counts, threshold))
        }
        6 => {
            let m = |i: usize| affine(p, &s.maps[i], &format!("s{i}")).map(|a| a.matrix);
            let conditions = six_round_conditions(&m(0)?, &m(7)?, [("M*2", m(2)?), ("M*5", m(5)?)]);
            Ok(AuditReport::from_matrices(AuditCheck::Cor2, p, conditions))
        }
        t => Err(Error::ScheduleArityMismatch { expected: 6, schedule: t }),
    }
}

/// Runs `check` against a construction.
pub fn audit(p: &DomainParams, c: &Construction, check: AuditCheck, threshold: u64) -> Result<AuditReport> {
    let kaf_rounds = || -> Result<Vec<KeyMap>> {
        match c {
            Construction::Kaf(r) => Ok(r.clone()),
            Construction::Kafw(s) if !s.has_whitening() => Ok(s.rounds.clone()),
            _ => Err(Error::Unsupported(format!(
                "cor1 applies to KAF schedules, got a {} schedule",
                c.name()
            ))),
        }
    };
    match check {
        AuditCheck::Def1 => check_definition1(p, &c.to_kafw()?, threshold),
        AuditCheck::Def3 => check_definition3(p, &c.to_kafw()?),
        AuditCheck::Cor1 => {
            let r = kaf_rounds()?;
            match r.len() {
                4 => check_corollary1_nl(p, &r, threshold),
                6 => check_corollary1_affine(p, &r),
                t => Err(Error::ScheduleArityMismatch { expected: 6, schedule: t }),
            }
        }
        AuditCheck::Cor2 => match c {
            Construction::Kafv(s) => check_corollary2(p, s, threshold),
            _ => Err(Error::Unsupported(format!(
                "cor2 applies to KAFv schedules, got a {} schedule",
                c.name()
            ))),
        },
    }
}
