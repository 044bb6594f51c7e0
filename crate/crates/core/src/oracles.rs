//! Seeded, lazily sampled ideal objects.
//!
//! Randomness comes from two fixed generators so every experiment can be
//! replayed from its seed:
//!
//! * random functions answer `x` with the SplitMix64 finalizer applied to
//!   `mix64(seed) + (x + 1)·γ` (γ the SplitMix64 increment), truncated to
//!   the output width. The answer depends only on `(seed, x)`.
//! * random permutations draw fresh values from a ChaCha8 stream seeded with
//!   `seed`, in query order. Fresh values are rejection-sampled against the
//!   set of already assigned values; once more than half of a small domain is
//!   assigned the oracle switches to explicit free lists.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::gf2::{DomainParams, Word};

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domains up to this many bits get free lists once half full.
const FREE_LIST_MAX_BITS: u32 = 20;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `base` under a domain-separation `tag`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let a = mix64(base.wrapping_add(GAMMA));
    let b = mix64(a ^ tag.wrapping_mul(GAMMA).wrapping_add(0x632b_e59b_d9b4_e019));
    mix64(b ^ index.wrapping_add(1).wrapping_mul(0xd1b5_4a32_d192_ed03))
}

fn width_mask(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

/// Lazily sampled random function on `bits`-bit words.
#[derive(Clone, Debug)]
pub struct RandomFunctionOracle {
    seed: u64,
    bits: u32,
    keyed_seed: u64,
    table: HashMap<u64, u64>,
}

impl RandomFunctionOracle {
    pub fn new(seed: u64, bits: u32) -> Self {
        assert!((1..=64).contains(&bits));
        Self {
            seed,
            bits,
            keyed_seed: mix64(seed),
            table: HashMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn query(&mut self, x: u64) -> u64 {
        let keyed = self.keyed_seed;
        let mask = width_mask(self.bits);
        *self
            .table
            .entry(x)
            .or_insert_with(|| mix64(keyed.wrapping_add(x.wrapping_add(1).wrapping_mul(GAMMA))) & mask)
    }

    /// Number of distinct inputs queried so far.
    pub fn query_count(&self) -> u64 {
        self.table.len() as u64
    }
}

#[derive(Clone, Debug)]
struct FreeSet {
    values: Vec<u64>,
    position: Vec<u32>,
}

impl FreeSet {
    fn build(size: u64, used: impl Fn(u64) -> bool) -> Self {
        let mut position = vec![u32::MAX; size as usize];
        let mut values = Vec::new();
        for v in 0..size {
            if !used(v) {
                position[v as usize] = values.len() as u32;
                values.push(v);
            }
        }
        Self { values, position }
    }

    fn remove(&mut self, v: u64) {
        let idx = self.position[v as usize];
        if idx == u32::MAX {
            return;
        }
        let last = *self.values.last().expect("non-empty free set");
        self.values.swap_remove(idx as usize);
        if last != v {
            self.position[last as usize] = idx;
        }
        self.position[v as usize] = u32::MAX;
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> u64 {
        self.values[rng.gen_range(0..self.values.len())]
    }
}

/// Lazily sampled random permutation on `bits`-bit words, queryable in both
/// directions.
#[derive(Clone, Debug)]
pub struct RandomPermutationOracle {
    seed: u64,
    bits: u32,
    forward: HashMap<u64, u64>,
    backward: HashMap<u64, u64>,
    rng: ChaCha8Rng,
    // (unassigned inputs, unassigned outputs)
    free: Option<(FreeSet, FreeSet)>,
}

impl RandomPermutationOracle {
    pub fn new(seed: u64, bits: u32) -> Self {
        assert!((1..=64).contains(&bits));
        Self {
            seed,
            bits,
            forward: HashMap::new(),
            backward: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            free: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn query(&mut self, direction: Direction, v: u64) -> u64 {
        debug_assert!(v <= width_mask(self.bits));
        match direction {
            Direction::Forward => {
                if let Some(&y) = self.forward.get(&v) {
                    return y;
                }
                let y = self.fresh(Direction::Forward);
                self.assign(v, y);
                y
            }
            Direction::Backward => {
                if let Some(&x) = self.backward.get(&v) {
                    return x;
                }
                let x = self.fresh(Direction::Backward);
                self.assign(x, v);
                x
            }
        }
    }

    pub fn forward(&mut self, x: u64) -> u64 {
        self.query(Direction::Forward, x)
    }

    pub fn backward(&mut self, y: u64) -> u64 {
        self.query(Direction::Backward, y)
    }

    /// Number of input/output pairs assigned so far.
    pub fn query_count(&self) -> u64 {
        self.forward.len() as u64
    }

    fn assign(&mut self, x: u64, y: u64) {
        self.forward.insert(x, y);
        self.backward.insert(y, x);
        if let Some((domain, range)) = self.free.as_mut() {
            domain.remove(x);
            range.remove(y);
        }
    }

    // Forward queries need an unassigned output, backward ones an unassigned input.
    fn fresh(&mut self, direction: Direction) -> u64 {
        if self.free.is_none()
            && self.bits <= FREE_LIST_MAX_BITS
            && (self.forward.len() as u64) * 2 >= 1u64 << self.bits
        {
            let size = 1u64 << self.bits;
            let domain = FreeSet::build(size, |v| self.forward.contains_key(&v));
            let range = FreeSet::build(size, |v| self.backward.contains_key(&v));
            self.free = Some((domain, range));
        }
        if let Some((domain, range)) = self.free.as_ref() {
            return match direction {
                Direction::Forward => range.pick(&mut self.rng),
                Direction::Backward => domain.pick(&mut self.rng),
            };
        }
        let mask = width_mask(self.bits);
        let taken = match direction {
            Direction::Forward => &self.backward,
            Direction::Backward => &self.forward,
        };
        loop {
            let candidate = self.rng.gen::<u64>() & mask;
            if !taken.contains_key(&candidate) {
                return candidate;
            }
        }
    }
}

/// Family of independent random permutations of `{0,1}^{2n}`, one per
/// n-bit key.
#[derive(Clone, Debug)]
pub struct IdealCipherOracle {
    seed: u64,
    params: DomainParams,
    permutations: HashMap<Word, RandomPermutationOracle>,
}

const IC_KEY_TAG: u64 = 0x4943;

impl IdealCipherOracle {
    pub fn new(seed: u64, params: DomainParams) -> Self {
        Self {
            seed,
            params,
            permutations: HashMap::new(),
        }
    }

    pub fn query(&mut self, key: Word, direction: Direction, block: u64) -> u64 {
        let seed = self.seed;
        let bits = 2 * self.params.n();
        self.permutations
            .entry(key)
            .or_insert_with(|| {
                RandomPermutationOracle::new(derive_seed(seed, IC_KEY_TAG, u64::from(key)), bits)
            })
            .query(direction, block)
    }

    /// Number of keys touched so far.
    pub fn keys_used(&self) -> usize {
        self.permutations.len()
    }
}

/// Something that encrypts 2n-bit blocks under n-bit keys.
pub trait BlockCipherBackend {
    fn params(&self) -> DomainParams;
    fn encrypt(&mut self, key: Word, block: Block) -> Block;
    fn decrypt(&mut self, key: Word, block: Block) -> Block;
}

impl BlockCipherBackend for IdealCipherOracle {
    fn params(&self) -> DomainParams {
        self.params
    }

    fn encrypt(&mut self, key: Word, block: Block) -> Block {
        let n = self.params.n();
        Block::unpack(self.query(key, Direction::Forward, block.pack(n)), n)
    }

    fn decrypt(&mut self, key: Word, block: Block) -> Block {
        let n = self.params.n();
        Block::unpack(self.query(key, Direction::Backward, block.pack(n)), n)
    }
}

/// `RK[E_k]`: answers `E_{k⊕Δ}` and its inverse for caller-chosen offsets
/// while keeping `k` hidden.
#[derive(Clone, Debug)]
pub struct RelatedKeyOracle<B> {
    key: Word,
    backend: B,
    query_count: u64,
}

impl<B: BlockCipherBackend> RelatedKeyOracle<B> {
    pub fn new(key: Word, backend: B) -> Self {
        Self {
            key,
            backend,
            query_count: 0,
        }
    }

    pub fn query(&mut self, delta: Word, direction: Direction, block: Block) -> Block {
        self.query_count += 1;
        let key = self.key ^ delta;
        match direction {
            Direction::Forward => self.backend.encrypt(key, block),
            Direction::Backward => self.backend.decrypt(key, block),
        }
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn params(&self) -> DomainParams {
        self.backend.params()
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }
}

/// A round function as seen by a cipher: `n`-bit input, `n`-bit output.
#[derive(Clone, Debug)]
pub enum FunctionOracle {
    Random(RandomFunctionOracle),
    Permutation(RandomPermutationOracle),
    /// Explicit table, indexed by input.
    Table(Vec<Word>),
    Identity,
    Constant(Word),
}

/// Which ideal object backs a round function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Function,
    Permutation,
}

impl FunctionOracle {
    pub fn sample(kind: OracleKind, seed: u64, n: u32) -> Self {
        match kind {
            OracleKind::Function => FunctionOracle::Random(RandomFunctionOracle::new(seed, n)),
            OracleKind::Permutation => {
                FunctionOracle::Permutation(RandomPermutationOracle::new(seed, n))
            }
        }
    }

    pub fn eval(&mut self, x: Word) -> Word {
        match self {
            FunctionOracle::Random(o) => o.query(u64::from(x)) as Word,
            FunctionOracle::Permutation(o) => o.forward(u64::from(x)) as Word,
            FunctionOracle::Table(t) => t[x as usize],
            FunctionOracle::Identity => x,
            FunctionOracle::Constant(c) => *c,
        }
    }
}

/// One entry of a query transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TranscriptRecord {
    F {
        function: usize,
        direction: Direction,
        input: String,
        output: String,
    },
    Rk {
        delta: String,
        direction: Direction,
        input: String,
        output: String,
    },
}

impl TranscriptRecord {
    pub fn function(p: &DomainParams, function: usize, input: Word, output: Word) -> Self {
        TranscriptRecord::F {
            function,
            direction: Direction::Forward,
            input: p.hex_word(input),
            output: p.hex_word(output),
        }
    }

    pub fn related_key(
        p: &DomainParams,
        delta: Word,
        direction: Direction,
        input: Block,
        output: Block,
    ) -> Self {
        TranscriptRecord::Rk {
            delta: p.hex_word(delta),
            direction,
            input: input.to_hex(p),
            output: output.to_hex(p),
        }
    }

    /// One JSON object per line, in arrival order.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("transcript records serialize")
    }
}
