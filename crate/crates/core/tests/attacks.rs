use std::collections::HashSet;

use kafw::attacks::{
    birthday_collision_attack, iterated_output_difference, run_quartet, weak_delta_conditions, AttackDistinguisher,
    AttackKind, AttackOptions, BirthdayParams, BoomerangParams, DeltaChoice, PlaintextChoice, WeakDeltaSpace,
};
use kafw::block::Block;
use kafw::feistel::{CipherInstance, Construction, RoundFunctionSet, RoundFunctions};
use kafw::oracles::{Direction, OracleKind, TranscriptRecord};
use kafw::rkagame::{estimate_world, run_trial, run_trial_with_transcript, GameOracles, WorldKind, WorldSpec};
use kafw::schedules::{builtin, random_affine_map, random_affine_schedule, BuiltinParams, KeyMap, KeySchedule};
use kafw::{DomainParams, Error, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A real-world oracle pair with a known key, outside the game harness.
struct KnownKey {
    cipher: CipherInstance,
    key: Word,
}

impl GameOracles for KnownKey {
    fn params(&self) -> DomainParams {
        self.cipher.params()
    }

    fn rounds(&self) -> usize {
        self.cipher.rounds()
    }

    fn rk(&mut self, delta: Word, direction: Direction, block: Block) -> kafw::Result<Block> {
        Ok(match direction {
            Direction::Forward => self.cipher.encrypt(self.key ^ delta, block),
            Direction::Backward => self.cipher.decrypt(self.key ^ delta, block),
        })
    }

    fn f(&mut self, round: usize, x: Word) -> kafw::Result<Word> {
        Ok(self.cipher.functions_mut().eval(round, x))
    }
}

fn options(delta: DeltaChoice) -> AttackOptions {
    AttackOptions {
        delta,
        plaintext: PlaintextChoice::Random,
        birthday: None,
    }
}

fn spec(p: DomainParams, s: KeySchedule, kind: OracleKind) -> WorldSpec {
    WorldSpec::new(p, Construction::Kafw(s), kind, true)
}

/// Random affine schedule with round matrix `i` copied from round `j`.
fn tied(p: &DomainParams, t: usize, ties: &[(usize, usize)], rng: &mut ChaCha8Rng) -> KeySchedule {
    let mut s = random_affine_schedule(p, t, rng);
    for &(i, j) in ties {
        // Keep the constant random so only the linear parts coincide.
        let fresh = random_affine_map(p, rng);
        let (KeyMap::Affine(src), KeyMap::Affine(c)) = (&s.rounds[j - 1], fresh) else {
            unreachable!()
        };
        s.rounds[i - 1] = KeyMap::Affine(kafw::AffineMap::new(src.matrix.clone(), c.constant));
    }
    s
}

fn assert_always_one(kind: AttackKind, p: DomainParams, s: KeySchedule, seeds: std::ops::Range<u64>, delta: DeltaChoice) {
    let d = AttackDistinguisher::new(kind, p, Construction::Kafw(s.clone()), options(delta)).unwrap();
    for seed in seeds {
        for oracle in [OracleKind::Permutation, OracleKind::Function] {
            let r = run_trial(&d, &spec(p, s.clone(), oracle), WorldKind::Real, seed).unwrap();
            assert!(r.output, "{} seed {seed}", kind.as_str());
        }
    }
}

#[test]
fn four_round_boomerang_always_returns_one() {
    let p = DomainParams::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..1000u64 {
        let s = random_affine_schedule(&p, 4, &mut rng);
        assert_always_one(AttackKind::Thm3, p, s, i..i + 1, DeltaChoice::Random);
    }
}

#[test]
fn longer_boomerangs_with_tied_bottom_rounds() {
    let p = DomainParams::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for i in 0..50u64 {
        assert_always_one(AttackKind::Thm3, p, tied(&p, 6, &[(5, 3), (6, 4)], &mut rng), i..i + 2, DeltaChoice::Random);
        assert_always_one(AttackKind::Thm4, p, tied(&p, 5, &[(5, 1)], &mut rng), i..i + 2, DeltaChoice::Random);
        assert_always_one(
            AttackKind::Thm4,
            p,
            tied(&p, 7, &[(5, 1), (6, 4), (7, 5)], &mut rng),
            i..i + 2,
            DeltaChoice::Random,
        );
    }
}

#[test]
fn complementation_quartet_shifts() {
    let p = DomainParams::new(8).unwrap();
    let a = KeySchedule::without_whitening(vec![KeyMap::identity(8); 4]).affine(&p).unwrap();
    let b = BoomerangParams::derive(&a, 0xff, Block::ZERO);
    assert_eq!(b.shifts, [0xff; 4]);
}

#[test]
fn bitperm_switch_uses_period_four_offsets() {
    let p = DomainParams::new(8).unwrap();
    let s = builtin("bitperm_bad5", &p, &BuiltinParams::default()).unwrap();
    let d = AttackDistinguisher::new(AttackKind::Thm4, p, Construction::Kafw(s.clone()), options(DeltaChoice::Lowest)).unwrap();
    let weak = d.weak_space().unwrap();
    assert_eq!(weak.basis.len(), 4);
    assert_eq!(weak.lowest(), 0x11);
    // Rotating by 1 and by 5 agree exactly on words of period 4.
    for delta in 1..256u32 {
        assert_eq!(weak.contains(delta), (delta << 4 | delta >> 4) & 0xff == delta);
    }
    assert_always_one(AttackKind::Thm4, p, s.clone(), 0..200, DeltaChoice::Fixed(0xff));
    assert_always_one(AttackKind::Thm4, p, s, 200..300, DeltaChoice::Random);
}

#[test]
fn any_round_differential_even_and_odd() {
    let p = DomainParams::new(8).unwrap();
    for t in [2usize, 5, 7, 8] {
        let s = builtin(&format!("identity_bad({t})"), &p, &BuiltinParams::default()).unwrap();
        assert_always_one(AttackKind::AppbAny, p, s, 0..100, DeltaChoice::Random);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for t in 2..=9usize {
        let ties: Vec<(usize, usize)> = (3..=t).map(|j| (j, j - 2)).collect();
        for i in 0..20 {
            let s = tied(&p, t, &ties, &mut rng);
            assert_always_one(AttackKind::AppbAny, p, s, i..i + 1, DeltaChoice::Random);
        }
    }
}

#[test]
fn odd_round_output_difference_by_direct_computation() {
    // Encrypt the pair directly and compare with the predicted difference.
    let p = DomainParams::new(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for t in [3usize, 4, 5, 6] {
        let ties: Vec<(usize, usize)> = (3..=t).map(|j| (j, j - 2)).collect();
        for seed in 0..20 {
            let s = tied(&p, t, &ties, &mut rng);
            let a = s.affine(&p).unwrap();
            let fs = RoundFunctionSet::sample(OracleKind::Function, true, t, seed, 6);
            let mut c = CipherInstance::kafw(p, t, s, fs).unwrap();
            let k = rng.gen::<Word>() & p.mask();
            let delta = 1 + rng.gen::<Word>() % 63;
            let w = Block::new(rng.gen::<Word>() & p.mask(), rng.gen::<Word>() & p.mask());
            let shift = BoomerangParams::derive(&a, delta, w).input_shift();
            let got = c.encrypt(k, w) ^ c.encrypt(k ^ delta, w ^ shift);
            let m = |i: usize| a.round_matrix(i).apply(delta);
            let w2 = a.whitening_matrix(2).apply(delta);
            let w3 = a.whitening_matrix(3).apply(delta);
            let expect = Block::new(m(t) ^ w2, m(t - 1) ^ w3);
            assert_eq!(got, expect);
            assert_eq!(iterated_output_difference(&a, delta), expect);
        }
    }
}

#[test]
fn five_round_top_trail_boomerang() {
    let p = DomainParams::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for i in 0..100u64 {
        assert_always_one(AttackKind::Appb5, p, tied(&p, 5, &[(3, 1)], &mut rng), i..i + 2, DeltaChoice::Random);
        assert_always_one(AttackKind::Appb5, p, tied(&p, 7, &[(3, 1), (4, 2), (5, 3)], &mut rng), i..i + 2, DeltaChoice::Random);
    }
}

#[test]
fn query_counts_and_no_repeated_queries() {
    let p = DomainParams::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let cases = [
        (AttackKind::Thm3, tied(&p, 4, &[], &mut rng), 4),
        (AttackKind::Thm4, tied(&p, 5, &[(5, 1)], &mut rng), 4),
        (AttackKind::Appb5, tied(&p, 5, &[(3, 1)], &mut rng), 4),
        (AttackKind::AppbAny, tied(&p, 4, &[(3, 1), (4, 2)], &mut rng), 2),
        (AttackKind::Probe, tied(&p, 4, &[], &mut rng), 4),
    ];
    for (kind, s, expected) in cases {
        let d = AttackDistinguisher::new(kind, p, Construction::Kafw(s.clone()), options(DeltaChoice::Random)).unwrap();
        for world in [WorldKind::Real, WorldKind::Ideal] {
            for seed in 0..50 {
                let (r, transcript) = run_trial_with_transcript(&d, &spec(p, s.clone(), OracleKind::Permutation), world, seed).unwrap();
                assert_eq!((r.rk_queries, r.f_queries), (expected, 0), "{}", kind.as_str());
                let mut seen = HashSet::new();
                for rec in &transcript {
                    let TranscriptRecord::Rk { delta, direction, input, .. } = rec else {
                        panic!("unexpected function query");
                    };
                    assert!(seen.insert((delta.clone(), *direction, input.clone())));
                }
                assert_eq!(transcript.len() as u64, expected);
            }
        }
    }
}

#[test]
fn ideal_world_rarely_accepts() {
    let p = DomainParams::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let cases = [
        (AttackKind::Thm3, tied(&p, 4, &[], &mut rng)),
        (AttackKind::Thm4, builtin("bitperm_bad5", &p, &BuiltinParams::default()).unwrap()),
        (AttackKind::Appb5, tied(&p, 5, &[(3, 1)], &mut rng)),
        (AttackKind::AppbAny, builtin("identity_bad(8)", &p, &BuiltinParams::default()).unwrap()),
    ];
    for (kind, s) in cases {
        let d = AttackDistinguisher::new(kind, p, Construction::Kafw(s.clone()), options(DeltaChoice::Random)).unwrap();
        let w = estimate_world(&d, &spec(p, s, OracleKind::Permutation), WorldKind::Ideal, 5000, 9).unwrap();
        // One 16-bit equality per trial: the expected count is about 0.08.
        assert!(w.ones <= 2, "{}: {}", kind.as_str(), w.ones);
    }
}

#[test]
fn preconditions() {
    let p = DomainParams::new(8).unwrap();
    let bp = BuiltinParams::default();
    let opts = AttackOptions::default();
    let minimal = Construction::Kafw(builtin("minimal4", &p, &bp).unwrap());
    for kind in [AttackKind::Thm3, AttackKind::AppbAny] {
        assert!(matches!(
            AttackDistinguisher::new(kind, p, minimal.clone(), opts.clone()),
            Err(Error::NotAffine(_))
        ));
    }
    for name in ["ortho6", "filled6"] {
        let c = Construction::Kafw(builtin(name, &p, &bp).unwrap());
        for kind in [AttackKind::Thm3, AttackKind::Thm4, AttackKind::Appb5, AttackKind::AppbAny] {
            assert!(
                matches!(AttackDistinguisher::new(kind, p, c.clone(), opts.clone()), Err(Error::NoWeakDelta(_))),
                "{name} {}",
                kind.as_str()
            );
        }
    }
    let four = Construction::Kafw(builtin("identity_bad(4)", &p, &bp).unwrap());
    assert!(matches!(
        AttackDistinguisher::new(AttackKind::Thm4, p, four.clone(), opts.clone()),
        Err(Error::TooFewRounds { min: 5, got: 4 })
    ));
    let rot = Construction::Kafw(builtin("bitperm_bad5", &p, &bp).unwrap());
    let fixed = |d| AttackOptions { delta: DeltaChoice::Fixed(d), ..AttackOptions::default() };
    assert!(matches!(
        AttackDistinguisher::new(AttackKind::Thm4, p, rot.clone(), fixed(0x01)),
        Err(Error::InvalidDelta(1))
    ));
    assert!(matches!(AttackDistinguisher::new(AttackKind::Thm4, p, rot, fixed(0)), Err(Error::InvalidDelta(0))));
    // Non-affine attacks accept any schedule.
    assert!(AttackDistinguisher::new(AttackKind::Birthday, p, minimal.clone(), opts.clone()).is_ok());
    assert!(AttackDistinguisher::new(AttackKind::Probe, p, minimal, opts).is_ok());
}

#[test]
fn weak_space_membership_is_exact() {
    let p = DomainParams::new(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    for _ in 0..50 {
        let s = tied(&p, 5, &[], &mut rng).affine(&p).unwrap();
        let Ok(space) = WeakDeltaSpace::new(6, weak_delta_conditions(AttackKind::Thm4, &s).unwrap()) else {
            continue;
        };
        let members: Vec<Word> = (1..64).filter(|&d| space.contains(d)).collect();
        assert_eq!(members.len() + 1, 1 << space.basis.len());
        assert!(members.iter().all(|&d| s.round_matrix(1).apply(d) == s.round_matrix(5).apply(d)));
        for _ in 0..10 {
            assert!(space.contains(space.random(&mut rng)));
        }
    }
}

#[test]
fn birthday_with_planted_collision() {
    let p = DomainParams::new(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    for trial in 0..20u64 {
        let s = random_affine_schedule(&p, 4, &mut rng);
        let c = Construction::Kafw(s);
        let key = rng.gen::<Word>() & p.mask();
        let offset = rng.gen::<Word>() & p.mask();
        let fs = RoundFunctionSet::sample(OracleKind::Function, false, 4, trial, 12);
        let mut o = KnownKey {
            cipher: CipherInstance::new(p, c.clone(), fs).unwrap(),
            key,
        };
        let planted = BirthdayParams {
            planted_offsets: Some(vec![offset]),
            planted_guesses: Some(vec![key ^ offset]),
            ..BirthdayParams::default()
        };
        let out = birthday_collision_attack(&mut o, &c, &planted, Block::new(5, 9), &mut rng).unwrap();
        assert!(out.output);
        assert_eq!(out.rk_queries, 2);
        assert_eq!(out.f_queries, 8);
        let wrong = BirthdayParams {
            planted_offsets: Some(vec![offset]),
            planted_guesses: Some(vec![key ^ offset ^ 1]),
            ..BirthdayParams::default()
        };
        let out = birthday_collision_attack(&mut o, &c, &wrong, Block::new(5, 9), &mut rng).unwrap();
        assert!(!out.output);
    }
}

#[test]
fn birthday_real_world_at_n12() {
    let p = DomainParams::new(12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let s = random_affine_schedule(&p, 4, &mut rng);
    let d = AttackDistinguisher::new(
        AttackKind::Birthday,
        p,
        Construction::Kafw(s.clone()),
        AttackOptions::default(),
    )
    .unwrap();
    assert_eq!(BirthdayParams::default_for(&p), BirthdayParams::new(128, 128));
    let real = estimate_world(&d, &spec(p, s.clone(), OracleKind::Function), WorldKind::Real, 100, 1).unwrap();
    // 1 − e^{−4} ≈ 0.98.
    assert!(real.frequency() >= 0.9, "{}", real.frequency());
    assert!(real.max_rk_queries <= 128 + 4);
    let ideal = estimate_world(&d, &spec(p, s, OracleKind::Function), WorldKind::Ideal, 200, 1).unwrap();
    assert!(ideal.ones <= 2);
}

#[test]
fn probe_quartet_with_zero_shifts_is_not_a_distinguisher() {
    let p = DomainParams::new(8).unwrap();
    let s = builtin("minimal4", &p, &BuiltinParams::default()).unwrap();
    let fs = RoundFunctionSet::sample(OracleKind::Permutation, true, 4, 1, 8);
    let mut o = KnownKey {
        cipher: CipherInstance::kafw(p, 4, s, fs).unwrap(),
        key: 0x3c,
    };
    let mut ones = 0;
    for delta in 1..256 {
        let b = BoomerangParams { delta, shifts: [0; 4], base: Block::new(delta, 0) };
        ones += u32::from(run_quartet(&mut o, &b).unwrap().output);
    }
    assert!(ones <= 2, "{ones}");
}
