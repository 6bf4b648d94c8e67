use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApfError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("integral(s) {0:?} do not converge as the integration range grows")]
    NonFinite(Vec<String>),
    #[error("dataset contains no events")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("optimizer did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("Fisher matrix is singular (det = {det:e})")]
    SingularFisher { det: f64 },
    #[error("invalid epsilon {0}: must lie in (0, 1)")]
    InvalidEpsilon(f64),
    #[error("epsilon {0} is not present in the threshold table")]
    MissingEpsilon(f64),
    #[error("model mismatch: table is for `{table}`, test uses `{model}`")]
    ModelMismatch { table: String, model: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

impl ApfError {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ApfError::InvalidParams(_) => "InvalidParams",
            ApfError::InvalidModel(_) => "InvalidModel",
            ApfError::UnknownModel(_) => "UnknownModel",
            ApfError::NonFinite(_) => "NonFinite",
            ApfError::EmptyDataset => "EmptyDataset",
            ApfError::InvalidDataset(_) => "InvalidDataset",
            ApfError::NonConvergence(_) => "NonConvergence",
            ApfError::SingularFisher { .. } => "SingularFisher",
            ApfError::InvalidEpsilon(_) => "InvalidEpsilon",
            ApfError::MissingEpsilon(_) => "MissingEpsilon",
            ApfError::ModelMismatch { .. } => "ModelMismatch",
            ApfError::InvalidConfig(_) => "InvalidConfig",
            ApfError::Io(_) => "Io",
            ApfError::Json(_) => "Json",
        }
    }
}

impl From<std::io::Error> for ApfError {
    fn from(e: std::io::Error) -> Self {
        ApfError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for ApfError {
    fn from(e: serde_json::Error) -> Self {
        ApfError::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ApfError>;
