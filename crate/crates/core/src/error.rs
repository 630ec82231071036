use thiserror::Error;

/// Errors raised across the gate set tomography toolkit.
#[derive(Debug, Error)]
pub enum GstError {
    #[error("unsupported Hilbert space dimension {0}")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("Kraus operators are not complete (max deviation from identity {deviation:.3e})")]
    IncompleteKraus { deviation: f64 },

    #[error("unknown gate label `{0}`")]
    UnknownGate(String),

    #[error("invalid gate label `{0}`: labels must be non-empty and must not contain ':'")]
    InvalidLabel(String),

    #[error("fiducial set is empty")]
    EmptyFiducials,

    #[error("need at least {needed} gate labels, found {found}")]
    TooFewGates { needed: usize, found: usize },

    #[error("informationally incomplete: rank {rank} < {required} (min singular value {min_singular_value:.3e})")]
    InformationallyIncomplete {
        rank: usize,
        required: usize,
        min_singular_value: f64,
    },

    #[error("Gram matrix is singular (min singular value {min_singular_value:.3e}, relative threshold {threshold:.1e})")]
    SingularGram {
        min_singular_value: f64,
        threshold: f64,
    },

    #[error("fiducial count {found} is not a square number d^2")]
    NonSquareFiducials { found: usize },

    #[error(
        "target fiducial count {target} is invalid (candidates {candidates}, minimum {minimum})"
    )]
    InvalidTargetCount {
        target: usize,
        candidates: usize,
        minimum: usize,
    },

    #[error("model probability {probability} for sequence `{sequence}` lies outside [0, 1]")]
    NonPhysicalProbability { sequence: String, probability: f64 },

    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("count invariant violated for `{sequence}`: n_plus={n_plus}, n_total={n_total}")]
    CountViolation {
        sequence: String,
        n_plus: u64,
        n_total: u64,
    },

    #[error("no data for sequence `{0}`")]
    MissingData(String),

    #[error("inconsistent fiducial indexing: {0}")]
    InconsistentFiducials(String),

    #[error("gauge transform is singular (|det| = {det:.3e})")]
    SingularGauge { det: f64 },

    #[error("gate sets have different labels or dimensions")]
    LabelMismatch,

    #[error("objective became non-finite during optimization")]
    NonFiniteObjective,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GstError>;
