use kafw::gf2::{
    half_swap_orthomorphism, is_irreducible, is_orthomorphism, BinMatrix, DomainParams, Word, REDUCTION_POLYNOMIALS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multiply-then-reduce over coefficient vectors (index = degree).
fn schoolbook_mul(a: Word, b: Word, n: u32, low_poly: u32) -> Word {
    let bits = |v: u64, len: usize| (0..len).map(|i| (v >> i & 1) as u8).collect::<Vec<u8>>();
    let a = bits(u64::from(a), n as usize);
    let b = bits(u64::from(b), n as usize);
    let mut prod = vec![0u8; 2 * n as usize];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] ^= x & y;
        }
    }
    let mut modulus = bits(u64::from(low_poly), n as usize);
    modulus.push(1);
    for deg in (n as usize..prod.len()).rev() {
        if prod[deg] == 1 {
            for (k, &c) in modulus.iter().enumerate() {
                prod[deg - n as usize + k] ^= c;
            }
        }
    }
    prod[..n as usize]
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &c)| acc | (Word::from(c) << i))
}

#[test]
fn small_field_values_match_schoolbook() {
    let p = DomainParams::new(3).unwrap();
    assert_eq!(p.polynomial(), 0b011);
    assert_eq!(p.gf_mul(0b010, 0b110), 0b111);
    assert_eq!(schoolbook_mul(0b010, 0b110, 3, 0b011), 0b111);
    // x³ reduces to x + 1 under x³+x+1.
    let cube = schoolbook_mul(schoolbook_mul(0b010, 0b010, 3, 0b011), 0b010, 3, 0b011);
    assert_eq!(cube, 0b011);
    assert_eq!(p.gf_cube(0b010), cube);
    assert_eq!(p.gf_cube(0), 0);
    assert_eq!(p.gf_cube(1), 1);
}

#[test]
fn multiplication_matches_schoolbook_exhaustively_small_n() {
    for n in 2..=6 {
        let p = DomainParams::new(n).unwrap();
        for a in 0..(1u32 << n) {
            for b in 0..(1u32 << n) {
                assert_eq!(p.gf_mul(a, b), schoolbook_mul(a, b, n, p.polynomial()));
            }
        }
    }
}

#[test]
fn every_nonzero_element_is_invertible_up_to_n8() {
    for n in 2..=8 {
        let p = DomainParams::new(n).unwrap();
        for a in 1..(1u32 << n) {
            let mut seen = vec![false; 1 << n];
            for x in 0..(1u32 << n) {
                seen[p.gf_mul(a, x) as usize] = true;
            }
            assert!(seen.iter().all(|&s| s), "n={n} a={a}");
        }
    }
}

#[test]
fn reduction_table_is_irreducible_for_every_width() {
    for n in 2..=32u32 {
        let full = (1u64 << n) | u64::from(REDUCTION_POLYNOMIALS[n as usize]);
        assert!(is_irreducible(full), "n={n}");
    }
}

fn field_axioms(n: u32, a: Word, b: Word, c: Word) {
    let p = DomainParams::new(n).unwrap();
    let m = p.mask();
    let (a, b, c) = (a & m, b & m, c & m);
    assert_eq!(p.gf_mul(a, p.gf_mul(b, c)), p.gf_mul(p.gf_mul(a, b), c));
    assert_eq!(p.gf_mul(a, b), p.gf_mul(b, a));
    assert_eq!(p.gf_mul(a, b ^ c), p.gf_mul(a, b) ^ p.gf_mul(a, c));
    assert_eq!(p.gf_cube(a), p.gf_mul(a, p.gf_mul(a, a)));
}

proptest! {
    #[test]
    fn field_axioms_n3(a: u32, b: u32, c: u32) {
        field_axioms(3, a, b, c);
    }

    #[test]
    fn field_axioms_n8(a: u32, b: u32, c: u32) {
        field_axioms(8, a, b, c);
    }

    #[test]
    fn field_axioms_n32(a: u32, b: u32, c: u32) {
        field_axioms(32, a, b, c);
        let p = DomainParams::new(32).unwrap();
        prop_assert_eq!(p.gf_mul(a, b), schoolbook_mul(a, b, 32, p.polynomial()));
    }

    #[test]
    fn matrix_vector_is_linear(seed: u64, u: u32, v: u32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=32u32);
        let mask = if n == 32 { u32::MAX } else { (1 << n) - 1 };
        let m = kafw::schedules::random_matrix(n, &mut rng);
        prop_assert_eq!(m.apply((u ^ v) & mask), m.apply(u & mask) ^ m.apply(v & mask));
        prop_assert_eq!(m.apply(0), 0);
        let other = kafw::schedules::random_matrix(n, &mut rng);
        prop_assert_eq!(m.compose(&other).apply(u & mask), m.apply(other.apply(u & mask)));
        prop_assert_eq!(m.xor(&other).apply(u & mask), m.apply(u & mask) ^ other.apply(u & mask));
    }
}

#[test]
fn kernel_invertibility_and_injectivity_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 1..=12u32 {
        for trial in 0..20 {
            let mut m = kafw::schedules::random_matrix(n, &mut rng);
            if trial % 3 == 0 && n > 1 {
                // force a dependency between two rows
                let mut rows = m.rows().to_vec();
                rows[0] = rows[1] ^ rows[n as usize - 1];
                m = BinMatrix::from_rows(n, rows).unwrap();
            }
            let kernel = m.kernel_basis();
            let injective = (1..(1u32 << n)).all(|d| m.apply(d) != 0);
            assert_eq!(kernel.is_empty(), m.is_invertible());
            assert_eq!(kernel.is_empty(), injective);
            assert_eq!(kernel.len() as u32 + m.rank(), n);
            for &v in &kernel {
                assert!(v != 0 && m.apply(v) == 0);
            }
        }
    }
}

#[test]
fn matrix_examples() {
    let id = BinMatrix::identity(8);
    assert!(id.is_invertible());
    assert!(id.kernel_basis().is_empty());
    assert!(!id.xor(&id).is_invertible());
    assert_eq!(BinMatrix::zero(8).kernel_basis().len(), 8);
    let reversal = BinMatrix::bit_permutation(4, &[3, 2, 1, 0]).unwrap();
    assert_eq!(reversal.apply(0b0011), 0b1100);
    for (r1, r3) in [(1u32, 3u32), (0, 5), (2, 7)] {
        let diff = BinMatrix::rotation(8, r1).xor(&BinMatrix::rotation(8, r3));
        assert_eq!(diff.apply(0xff), 0);
        assert!(!diff.is_invertible());
    }
}

#[test]
fn half_swap_is_an_orthomorphism_for_even_widths() {
    for n in (2..=16).step_by(2) {
        assert!(is_orthomorphism(n, |k| half_swap_orthomorphism(n, k)).unwrap(), "n={n}");
    }
    assert!(!is_orthomorphism(8, |k| k).unwrap());
    assert!(!is_orthomorphism(8, |_| 3).unwrap());
    // n = 2: π(a‖b) = b‖(a⊕b)
    let table: Vec<Word> = (0..4).map(|k| half_swap_orthomorphism(2, k)).collect();
    assert_eq!(table, vec![0b00, 0b11, 0b01, 0b10]);
}
