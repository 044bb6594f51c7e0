use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("half-block width {0} outside the supported range 2..=32")]
    InvalidWidth(u32),
    #[error("polynomial {poly:#x} is not an irreducible polynomial of degree {n}")]
    ReduciblePolynomial { n: u32, poly: u64 },
    #[error("exhaustive enumeration needs n <= 16, got n = {0}")]
    DomainTooLarge(u32),
    #[error("bad matrix: {0}")]
    BadMatrix(String),
    #[error("value {value:#x} does not fit in {bits} bits")]
    ValueOutOfRange { value: u64, bits: u32 },
    #[error("schedule has {schedule} rounds but {expected} were expected")]
    ScheduleArityMismatch { expected: usize, schedule: usize },
    #[error("construction needs at least {min} rounds, got {got}")]
    TooFewRounds { min: usize, got: usize },
    #[error("unknown builtin schedule `{0}`")]
    UnknownName(String),
    #[error("builtin schedule `{0}` needs an even half-block width")]
    OddN(String),
    #[error("key-schedule map `{0}` is not affine")]
    NotAffine(String),
    #[error("no nonzero offset satisfies the weak-difference conditions: {0}")]
    NoWeakDelta(String),
    #[error("offset {0:#x} does not satisfy the weak-difference conditions")]
    InvalidDelta(u32),
    #[error("{0}")]
    Unsupported(String),
    #[error("query budget exceeded: {0}")]
    QueryBudgetExceeded(String),
    #[error("redundant related-key query (offset {delta:#x}, {direction}, block {block:#x})")]
    RedundantQuery { delta: u32, direction: &'static str, block: u64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl Error {
    /// Precondition failures are reported by the CLI with a distinct exit code.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NotAffine(_)
                | Error::NoWeakDelta(_)
                | Error::InvalidDelta(_)
                | Error::ScheduleArityMismatch { .. }
                | Error::TooFewRounds { .. }
                | Error::OddN(_)
                | Error::DomainTooLarge(_)
                | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
