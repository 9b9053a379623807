use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported field size q = {0} (supported: 2,3,4,5,7,8,9,11,13,16)")]
    UnsupportedField(usize),
    #[error("modulus {0:?} is not irreducible")]
    ReducibleModulus(Vec<u8>),
    #[error("inverse of zero")]
    InverseOfZero,
    #[error("{what}: size {count} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u128,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range (size {size})")]
    OutOfRange { index: usize, size: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{what}: realizations disagree, residual {residual:e}")]
    Disagreement { what: String, residual: f64 },
    #[error("umvirate contains no invertible matrix")]
    NoInvertible,
    #[error("empty set")]
    EmptySet,
    #[error("isotypic refinement failed: {0}")]
    Refinement(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
