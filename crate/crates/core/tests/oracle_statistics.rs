use kafw::block::Block;
use kafw::oracles::{Direction, IdealCipherOracle, RandomFunctionOracle, RandomPermutationOracle, RelatedKeyOracle};
use kafw::DomainParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Upper 0.1% points of the chi-square distribution.
const CHI2_999_DF15: f64 = 37.70;
const CHI2_999_DF255: f64 = 330.52;

fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

#[test]
fn lazy_permutation_image_of_zero_is_uniform() {
    let mut counts = vec![0u64; 16];
    for seed in 0..100_000u64 {
        let mut p = RandomPermutationOracle::new(seed, 4);
        counts[p.forward(0) as usize] += 1;
    }
    let stat = chi_square(&counts);
    assert!(stat < CHI2_999_DF15, "chi-square {stat}");
}

#[test]
fn lazy_permutation_late_images_are_uniform() {
    // Query 15 other inputs first, so the last image comes from the free list.
    let mut counts = vec![0u64; 16];
    for seed in 0..50_000u64 {
        let mut p = RandomPermutationOracle::new(seed, 4);
        for x in 1..16 {
            p.forward(x);
        }
        counts[p.forward(0) as usize] += 1;
    }
    let stat = chi_square(&counts);
    assert!(stat < CHI2_999_DF15, "chi-square {stat}");
}

#[test]
fn random_function_outputs_are_uniform_and_seed_independent() {
    let mut counts = vec![0u64; 256];
    let mut pair_counts = vec![0u64; 256];
    for seed in 0..200u64 {
        let mut a = RandomFunctionOracle::new(seed, 8);
        let mut b = RandomFunctionOracle::new(seed + 1_000_000, 8);
        for x in 0..256 {
            let (ya, yb) = (a.query(x), b.query(x));
            counts[ya as usize] += 1;
            pair_counts[(ya ^ yb) as usize] += 1;
        }
    }
    assert!(chi_square(&counts) < CHI2_999_DF255);
    // Outputs of independent tables XOR to a uniform value.
    assert!(chi_square(&pair_counts) < CHI2_999_DF255);
}

#[test]
fn permutation_consistency_under_random_interleavings() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for bits in [4u32, 6, 10, 20] {
        let size = 1u64 << bits;
        for seed in 0..20 {
            let mut p = RandomPermutationOracle::new(seed, bits);
            let mut forward = std::collections::HashMap::new();
            let mut backward = std::collections::HashMap::new();
            let queries = (size as usize).min(3000);
            for _ in 0..queries {
                let v = rng.gen_range(0..size);
                if rng.gen::<bool>() {
                    let y = p.forward(v);
                    assert_eq!(*forward.entry(v).or_insert(y), y);
                    assert_eq!(*backward.entry(y).or_insert(v), v);
                } else {
                    let x = p.backward(v);
                    assert_eq!(*backward.entry(v).or_insert(x), x);
                    assert_eq!(*forward.entry(x).or_insert(v), v);
                }
            }
            for (&x, &y) in &forward {
                assert_eq!(p.backward(y), x);
            }
        }
    }
}

#[test]
fn exhausted_permutation_is_a_bijection() {
    for seed in 0..50 {
        let mut p = RandomPermutationOracle::new(seed, 4);
        let mut img: Vec<u64> = (0..16).map(|x| p.forward(x)).collect();
        img.sort_unstable();
        assert_eq!(img, (0..16).collect::<Vec<_>>());
    }
}

#[test]
fn ideal_cipher_keys_give_distinct_independent_permutations() {
    let p = DomainParams::new(4).unwrap();
    let mut ic = IdealCipherOracle::new(3, p);
    let tables: Vec<Vec<u64>> = (0..16)
        .map(|k| (0..256).map(|w| ic.query(k, Direction::Forward, w)).collect())
        .collect();
    for i in 0..16 {
        for j in i + 1..16 {
            assert_ne!(tables[i], tables[j]);
        }
        for (w, &c) in tables[i].iter().enumerate() {
            assert_eq!(ic.query(i as u32, Direction::Backward, c), w as u64);
        }
    }
    // Replaying one key's query sequence reproduces its table.
    let mut again = IdealCipherOracle::new(3, p);
    let replay: Vec<u64> = (0..256).map(|w| again.query(7, Direction::Forward, w)).collect();
    assert_eq!(replay, tables[7]);
}

#[test]
fn related_key_oracle_round_trips_and_counts() {
    let p = DomainParams::new(6).unwrap();
    let mut rk = RelatedKeyOracle::new(0x21, IdealCipherOracle::new(8, p));
    let mut direct = IdealCipherOracle::new(8, p);
    let w = Block::new(0x3, 0x3e);
    for delta in [0u32, 1, 0x3f] {
        let c = rk.query(delta, Direction::Forward, w);
        assert_eq!(rk.query(delta, Direction::Backward, c), w);
        assert_eq!(
            c,
            Block::unpack(direct.query(0x21 ^ delta, Direction::Forward, w.pack(6)), 6)
        );
    }
    assert_eq!(rk.query_count(), 6);
}
