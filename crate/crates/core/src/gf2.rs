//! Arithmetic over GF(2^n) and linear algebra over F2 on n-bit words.
//!
//! Bit 0 of a word is its least significant bit and holds the coefficient of
//! x^0 when the word is read as a field element. Matrices are stored row-major
//! as `n` words: bit `j` of row `i` is entry `(i, j)`, and bit `i` of
//! `m · v` is the parity of `row_i & v`. A matrix whose rows are distinct unit
//! vectors therefore acts as a bit permutation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An n-bit value, n <= 32.
pub type Word = u32;

/// Largest half-block width supported by the arithmetic.
pub const MAX_WIDTH: u32 = 32;
/// Largest width for which exhaustive enumeration is allowed.
pub const MAX_EXHAUSTIVE_WIDTH: u32 = 16;

/// Low `n` bits of the lowest-lexicographic irreducible polynomial of degree
/// `n` (the leading `x^n` term is implicit). Indexed by `n`.
pub const REDUCTION_POLYNOMIALS: [u32; 33] = [
    0, 0, 0x3, 0x3, 0x3, 0x5, 0x3, 0x3, 0x1b, 0x3, 0x9, 0x5, 0x9, 0x1b, 0x21, 0x3, 0x2b, 0x9, 0x9,
    0x27, 0x9, 0x5, 0x3, 0x21, 0x1b, 0x9, 0x1b, 0x27, 0x3, 0x5, 0x3, 0x9, 0x8d,
];

/// Half-block width together with the field used for `⊗`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainParams {
    n: u32,
    polynomial: u32,
}

impl DomainParams {
    /// Width `n` with the default reduction polynomial.
    pub fn new(n: u32) -> Result<Self> {
        if !(2..=MAX_WIDTH).contains(&n) {
            return Err(Error::InvalidWidth(n));
        }
        Ok(Self {
            n,
            polynomial: REDUCTION_POLYNOMIALS[n as usize],
        })
    }

    /// Width `n` with a caller-chosen reduction polynomial (low `n` bits).
    pub fn with_polynomial(n: u32, polynomial: u32) -> Result<Self> {
        if !(2..=MAX_WIDTH).contains(&n) {
            return Err(Error::InvalidWidth(n));
        }
        let full = (1u64 << n) | u64::from(polynomial);
        if u64::from(polynomial) >= 1u64 << n || !is_irreducible(full) {
            return Err(Error::ReduciblePolynomial { n, poly: full });
        }
        Ok(Self { n, polynomial })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `N = 2^n`.
    pub fn size(&self) -> u64 {
        1u64 << self.n
    }

    pub fn mask(&self) -> Word {
        if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        }
    }

    pub fn polynomial(&self) -> u32 {
        self.polynomial
    }

    pub fn check_word(&self, v: u64) -> Result<Word> {
        if v > u64::from(self.mask()) {
            return Err(Error::ValueOutOfRange { value: v, bits: self.n });
        }
        Ok(v as Word)
    }

    pub fn require_exhaustive(&self) -> Result<()> {
        if self.n > MAX_EXHAUSTIVE_WIDTH {
            return Err(Error::DomainTooLarge(self.n));
        }
        Ok(())
    }

    /// Product in GF(2^n).
    pub fn gf_mul(&self, a: Word, b: Word) -> Word {
        let top = 1u64 << (self.n - 1);
        let mask = u64::from(self.mask());
        let poly = u64::from(self.polynomial);
        let mut a = u64::from(a);
        let mut b = b;
        let mut acc = 0u64;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            let carry = a & top != 0;
            a = (a << 1) & mask;
            if carry {
                a ^= poly;
            }
        }
        acc as Word
    }

    pub fn gf_cube(&self, a: Word) -> Word {
        self.gf_mul(self.gf_mul(a, a), a)
    }

    /// Lowercase hex of an n-bit word, `ceil(n/4)` digits.
    pub fn hex_word(&self, v: Word) -> String {
        hex_fixed(u64::from(v), self.n)
    }

    /// Lowercase hex of a 2n-bit block value, `ceil(2n/4)` digits.
    pub fn hex_block(&self, v: u64) -> String {
        hex_fixed(v, 2 * self.n)
    }
}

/// Lowercase hex without prefix, zero-padded to `ceil(bits/4)` digits.
pub fn hex_fixed(v: u64, bits: u32) -> String {
    let width = bits.div_ceil(4) as usize;
    format!("{v:0width$x}")
}

/// Parse hex with or without a `0x` prefix.
pub fn parse_hex(s: &str) -> Option<u64> {
    let s = s.trim();
    let s = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    if s.is_empty() {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}

fn poly_degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_rem(mut a: u64, b: u64) -> u64 {
    let db = poly_degree(b);
    while a != 0 && poly_degree(a) >= db {
        a ^= b << (poly_degree(a) - db);
    }
    a
}

/// Irreducibility over F2 by trial division with every polynomial of degree
/// at most half of `p`'s degree.
pub fn is_irreducible(p: u64) -> bool {
    let d = poly_degree(p);
    if d < 1 {
        return false;
    }
    let half = d / 2;
    (2u64..(1u64 << (half + 1))).all(|q| poly_rem(p, q) != 0)
}

/// Square matrix over F2 acting on n-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinMatrix {
    n: u32,
    rows: Vec<Word>,
}

impl BinMatrix {
    pub fn from_rows(n: u32, rows: Vec<Word>) -> Result<Self> {
        if !(1..=MAX_WIDTH).contains(&n) {
            return Err(Error::InvalidWidth(n));
        }
        if rows.len() != n as usize {
            return Err(Error::BadMatrix(format!(
                "expected {n} rows, found {}",
                rows.len()
            )));
        }
        let mask = width_mask(n);
        if let Some(r) = rows.iter().find(|&&r| r & !mask != 0) {
            return Err(Error::BadMatrix(format!("row {r:#x} has bits above bit {}", n - 1)));
        }
        Ok(Self { n, rows })
    }

    pub fn zero(n: u32) -> Self {
        Self {
            n,
            rows: vec![0; n as usize],
        }
    }

    pub fn identity(n: u32) -> Self {
        Self {
            n,
            rows: (0..n).map(|i| 1 << i).collect(),
        }
    }

    /// Matrix of the linear map given by its images of the unit vectors.
    pub fn from_linear_fn(n: u32, f: impl Fn(Word) -> Word) -> Self {
        let mut rows = vec![0; n as usize];
        for j in 0..n {
            let col = f(1 << j);
            for (i, row) in rows.iter_mut().enumerate() {
                if col >> i & 1 == 1 {
                    *row |= 1 << j;
                }
            }
        }
        Self { n, rows }
    }

    /// Output bit `i` takes input bit `source[i]`.
    pub fn bit_permutation(n: u32, source: &[u32]) -> Result<Self> {
        let mut seen = vec![false; n as usize];
        if source.len() != n as usize
            || source
                .iter()
                .any(|&s| s >= n || std::mem::replace(&mut seen[s as usize], true))
        {
            return Err(Error::BadMatrix("not a permutation of bit positions".into()));
        }
        Ok(Self {
            n,
            rows: source.iter().map(|&s| 1 << s).collect(),
        })
    }

    /// Left rotation of the n-bit word by `r` positions.
    pub fn rotation(n: u32, r: u32) -> Self {
        let source: Vec<u32> = (0..n).map(|i| (i + n - r % n) % n).collect();
        Self::bit_permutation(n, &source).expect("rotation is a permutation")
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rows(&self) -> &[Word] {
        &self.rows
    }

    pub fn apply(&self, v: Word) -> Word {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &row)| acc | (((row & v).count_ones() & 1) << i))
    }

    pub fn xor(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.n, other.n, "matrix widths differ");
        BinMatrix {
            n: self.n,
            rows: self.rows.iter().zip(&other.rows).map(|(a, b)| a ^ b).collect(),
        }
    }

    /// `self · other`, i.e. apply `other` first.
    pub fn compose(&self, other: &BinMatrix) -> BinMatrix {
        BinMatrix::from_linear_fn(self.n, |v| self.apply(other.apply(v)))
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|&r| r == 0)
    }

    pub fn rank(&self) -> u32 {
        row_echelon(&self.rows, self.n).1.len() as u32
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.n
    }

    /// Basis of `{v : self · v = 0}`; empty iff the matrix is invertible.
    pub fn kernel_basis(&self) -> Vec<Word> {
        kernel_of_rows(&self.rows, self.n)
    }

    /// One hex word per row, row 0 first.
    pub fn to_hex_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|&r| hex_fixed(u64::from(r), self.n))
            .collect()
    }
}

fn width_mask(n: u32) -> Word {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Reduced row echelon form; returns the reduced rows and pivot columns.
fn row_echelon(rows: &[Word], n: u32) -> (Vec<Word>, Vec<u32>) {
    let mut m: Vec<Word> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let bit = 1 << col;
        let Some(p) = (r..m.len()).find(|&i| m[i] & bit != 0) else {
            continue;
        };
        m.swap(r, p);
        let pivot_row = m[r];
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && *row & bit != 0 {
                *row ^= pivot_row;
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Basis of the common null space of an arbitrary list of n-bit rows, i.e.
/// all `v` with `parity(row & v) = 0` for every row. Basis vectors are
/// returned in increasing numeric order.
pub fn kernel_of_rows(rows: &[Word], n: u32) -> Vec<Word> {
    let (reduced, pivots) = row_echelon(rows, n);
    let mut basis: Vec<Word> = (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v: Word = 1 << free;
            for (row, &p) in reduced.iter().zip(&pivots) {
                if row >> free & 1 == 1 {
                    v |= 1 << p;
                }
            }
            v
        })
        .collect();
    basis.sort_unstable();
    basis
}

/// Common kernel of several matrices (`v` with `m · v = 0` for all `m`).
pub fn common_kernel<'a>(n: u32, matrices: impl IntoIterator<Item = &'a BinMatrix>) -> Vec<Word> {
    let rows: Vec<Word> = matrices
        .into_iter()
        .flat_map(|m| m.rows.iter().copied())
        .collect();
    kernel_of_rows(&rows, n)
}

/// `v ↦ matrix · v ⊕ constant`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineMap {
    pub matrix: BinMatrix,
    pub constant: Word,
}

impl AffineMap {
    pub fn new(matrix: BinMatrix, constant: Word) -> Self {
        Self { matrix, constant }
    }

    pub fn linear(matrix: BinMatrix) -> Self {
        Self { matrix, constant: 0 }
    }

    pub fn zero(n: u32) -> Self {
        Self::linear(BinMatrix::zero(n))
    }

    pub fn apply(&self, v: Word) -> Word {
        self.matrix.apply(v) ^ self.constant
    }

    pub fn xor(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: self.matrix.xor(&other.matrix),
            constant: self.constant ^ other.constant,
        }
    }
}

/// True iff both `x ↦ perm(x)` and `x ↦ x ⊕ perm(x)` are bijections of
/// `{0,1}^n`.
pub fn is_orthomorphism(n: u32, perm: impl Fn(Word) -> Word) -> Result<bool> {
    if n > MAX_EXHAUSTIVE_WIDTH {
        return Err(Error::DomainTooLarge(n));
    }
    let size = 1usize << n;
    let mut image = vec![false; size];
    let mut sum_image = vec![false; size];
    for x in 0..size as Word {
        let y = perm(x);
        let s = x ^ y;
        if y as usize >= size || image[y as usize] || sum_image[s as usize] {
            return Ok(false);
        }
        image[y as usize] = true;
        sum_image[s as usize] = true;
    }
    Ok(true)
}

/// `π(kL‖kR) = kR‖(kL⊕kR)` for even `n`, with `kL` the high half.
pub fn half_swap_orthomorphism(n: u32, k: Word) -> Word {
    let h = n / 2;
    let low = width_mask(h);
    let (kl, kr) = (k >> h & low, k & low);
    (kr << h) | (kl ^ kr)
}
