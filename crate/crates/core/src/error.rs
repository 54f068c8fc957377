use thiserror::Error;

/// Errors raised across the library. Variants follow the failure classes the
/// operations are documented with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("generator matrices do not define a homomorphism (residual {residual:e})")]
    InconsistentGenerators { residual: f64 },
    #[error("permutation action is not a homomorphism: {0}")]
    InconsistentAction(String),
    #[error("unsupported group: {0}")]
    UnsupportedGroup(String),
    #[error("isotypic decomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("no symmetry data for branch type `{0}`")]
    MissingBranchSpec(String),
    #[error("invalid branch permutation: {0}")]
    InvalidPermutation(String),
    #[error("missing metadata: {0}")]
    MissingMetadata(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("corrupt record: {0}")]
    CorruptRecord(String),
    #[error("schema mismatch at column `{column}`: {reason}")]
    Schema { column: String, reason: String },
    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("equivariance violated at sample {sample}: off-block norm {norm:e}")]
    EquivarianceViolation { sample: usize, norm: f64 },
    #[error("centre of mass undefined: total mass is zero")]
    UndefinedCom,
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
