use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at coordinate {coordinate}")]
    NonFiniteLoss { coordinate: usize },

    #[error("{system} diverged at iterate {index}")]
    Divergence { system: &'static str, index: usize },

    #[error("{path}: line {row}: cannot parse {cell:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        cell: String,
    },

    #[error("{path}: line {row} has no column {column}")]
    MissingColumn {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("{path}: no data rows")]
    EmptySeries { path: PathBuf },

    #[error("series {name:?} is constant; cannot scale")]
    DegenerateScale { name: String },

    #[error("series too short: need at least {required} points, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: &'static str },

    #[error("cache does not match model: {0}")]
    CacheMismatch(String),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteTraining { epoch: usize, batch: usize },

    #[error("missing report cell: dataset {dataset:?}, model {model}")]
    MissingCell { dataset: String, model: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
