use std::ops::BitXor;

use serde::{Deserialize, Serialize};

use crate::gf2::{DomainParams, Word};

/// A 2n-bit cipher state `L‖R`. When packed into a single integer, `L`
/// occupies the high `n` bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub left: Word,
    pub right: Word,
}

impl Block {
    pub const ZERO: Block = Block { left: 0, right: 0 };

    pub const fn new(left: Word, right: Word) -> Self {
        Self { left, right }
    }

    pub fn pack(self, n: u32) -> u64 {
        (u64::from(self.left) << n) | u64::from(self.right)
    }

    pub fn unpack(v: u64, n: u32) -> Self {
        let mask = (1u64 << n) - 1;
        Self {
            left: (v >> n & mask) as Word,
            right: (v & mask) as Word,
        }
    }

    /// `R‖L`.
    pub fn swapped(self) -> Self {
        Self {
            left: self.right,
            right: self.left,
        }
    }

    pub fn fits(self, p: &DomainParams) -> bool {
        self.left <= p.mask() && self.right <= p.mask()
    }

    pub fn to_hex(self, p: &DomainParams) -> String {
        p.hex_block(self.pack(p.n()))
    }
}

impl BitXor for Block {
    type Output = Block;

    fn bitxor(self, rhs: Block) -> Block {
        Block {
            left: self.left ^ rhs.left,
            right: self.right ^ rhs.right,
        }
    }
}
