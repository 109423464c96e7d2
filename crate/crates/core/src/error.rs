use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by scene construction, data ingestion and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid material profile: {0}")]
    InvalidProfile(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("frequency {frequency_ghz} GHz outside data span [{min_ghz}, {max_ghz}] GHz")]
    OutOfBand {
        frequency_ghz: f64,
        min_ghz: f64,
        max_ghz: f64,
    },

    #[error("molecular noise is enabled but no received power was supplied")]
    MissingReceivedPower,

    #[error("no propagation path available")]
    NoPath,

    #[error("unsupported interaction order {0} (maximum is 2)")]
    UnsupportedOrder(u8),

    #[error("unknown scenario preset `{0}` (expected `ieee` or `thz`)")]
    UnknownPreset(String),

    #[error("missing node `{0}`")]
    MissingNode(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user data (as opposed to I/O failures).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
