//! Key-alternating Feistel ciphers with whitening keys, their related-key
//! attacks, key-schedule auditing and a real-vs-ideal distinguishing harness.

pub mod attacks;
pub mod auditor;
pub mod block;
pub mod equivalence;
pub mod error;
pub mod feistel;
pub mod gf2;
pub mod oracles;
pub mod rkagame;
pub mod schedule_file;
pub mod schedules;

pub use block::Block;
pub use error::{Error, Result};
pub use gf2::{AffineMap, BinMatrix, DomainParams, Word};
