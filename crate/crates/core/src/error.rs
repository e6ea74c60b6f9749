use thiserror::Error;

use crate::estimate::ParamEstimate;
use crate::npt::NptOrder;
use crate::sigsyn::ModulationType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("peak count for {modulation} at order {order} is not defined")]
    UndefinedCell {
        modulation: ModulationType,
        order: NptOrder,
    },

    #[error("insufficient peaks for {modulation}: {reason}")]
    InsufficientPeaks {
        modulation: ModulationType,
        reason: String,
        partial: Option<Box<ParamEstimate>>,
    },

    #[error("line assignment failed: {0}")]
    Assignment(String),

    #[error("feature configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("zero signal energy")]
    ZeroEnergy,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
