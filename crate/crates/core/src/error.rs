use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header is missing required column `{0}`")]
    MissingColumn(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dataset has {0} rows; at least 10 are needed for a 70/20/10 split")]
    TooFewRows(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidParams(String),
    #[error("expected {expected} features, got {got}")]
    FeatureArity { expected: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("undefined R²: y_true is constant")]
    UndefinedR2,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("unknown group field `{0}` (expected vehicleType or brand)")]
    UnknownGroupField(String),
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("unsupported model file version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error("malformed dataset file: {0}")]
    MalformedDataset(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
