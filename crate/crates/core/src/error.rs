use thiserror::Error;

/// Errors raised by kernel construction, the contraction engine, bounds and
/// the Monte Carlo harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tuple {0:?} is not strictly increasing")]
    NonCanonicalTuple(Vec<usize>),
    #[error("index {index} outside [1, {dim}]")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("duplicate tuple {0:?}")]
    DuplicateTuple(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel has zero norm")]
    ZeroKernel,
    #[error("unsupported family parameters: {0}")]
    UnsupportedFamilyParameters(String),
    #[error("materializing {values} values exceeds the cap of {cap}")]
    MaterializationTooLarge { values: u128, cap: usize },
    #[error("contraction rank {r} outside 0..={d}")]
    RankOutOfRange { r: usize, d: usize },
    #[error("order {0} is odd")]
    OddOrder(usize),
    #[error("kernel is not normalized: d!|f|^2 = {0}")]
    NotNormalized(f64),
    #[error("kernel is not normalized to 2*nu = {expected}: d!|f|^2 = {got}")]
    NotNormalizedToTwoNu { expected: f64, got: f64 },
    #[error("invalid degrees of freedom {0}")]
    InvalidDegrees(u32),
    #[error("exact enumeration over 2^{0} sign patterns is too large")]
    EnumerationTooLarge(usize),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("order mismatch: d_i = {di} exceeds d_j = {dj}")]
    OrderMismatch { di: usize, dj: usize },
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code under the CLI contract: 2 for validation failures,
    /// 3 for capacity limits.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MaterializationTooLarge { .. } | Error::EnumerationTooLarge(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
