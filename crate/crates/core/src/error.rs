use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: parse error: {msg}")]
    Parse { file: String, line: u64, msg: String },

    #[error("{file}:{line}: {msg}")]
    Validation { file: String, line: u64, msg: String },

    #[error("self-loop ({0}, {0}) is not allowed")]
    SelfLoop(usize),

    #[error("network has {0} node(s); at least 2 are required")]
    DegenerateNetwork(usize),

    #[error("attribute `{attr}` is missing for node {node}")]
    MissingCovariate { attr: String, node: usize },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("unsupported term `{0}`")]
    UnsupportedTerm(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("information matrix is singular; the model is not identified on this network")]
    NonIdentified,

    #[error("brute-force enumeration supports at most {max} nodes, got {n}")]
    SizeLimit { n: usize, max: usize },

    #[error("no observations left to pool: {0}")]
    EmptyPool(String),

    #[error("invalid observation for network `{network}`: {msg}")]
    InvalidObservation { network: String, msg: String },

    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),

    #[error("empty request: {0}")]
    EmptyRequest(String),

    #[error("column `{0}` has no observed values and cannot be imputed")]
    UnimputableColumn(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Input did not conform to a schema or a documented invariant.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::SelfLoop(_)
                | Error::UnknownAttribute(_)
                | Error::UnsupportedTerm(_)
                | Error::InvalidModel(_)
                | Error::InvalidConfig(_)
                | Error::InvalidObservation { .. }
                | Error::MissingCovariate { .. }
                | Error::Json(_)
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
