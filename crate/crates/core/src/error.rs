//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid carrier: {0}")]
    InvalidCarrier(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("singular geometry: {0}")]
    SingularGeometry(String),
    #[error("invalid channel model: {0}")]
    InvalidChannelModel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate channel: all entries are zero")]
    DegenerateChannel,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("resonant configuration: I + Z0*Y is singular")]
    ResonantConfiguration,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unobservable: beam responses vanish over the entire search grid")]
    Unobservable,
    #[error("unidentifiable geometry: Fisher information matrix is singular")]
    UnidentifiableGeometry,
    #[error("too many failed trials: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
