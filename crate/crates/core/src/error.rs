use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in input channel {channel}")]
    NonFinite { channel: usize },

    /// The accelerometer norm is too small to carry a gravity direction.
    #[error("attitude unobservable: accelerometer norm {norm} below 0.1 m/s^2")]
    Unobservable { norm: f64 },

    #[error("quaternion is not unit norm (|q| = {norm})")]
    NonUnitQuaternion { norm: f64 },

    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite state in layer `{layer}` at timestep {timestep}")]
    NonFiniteState { layer: &'static str, timestep: usize },

    #[error("non-finite gradient in `{block}` at timestep {timestep}")]
    NonFiniteGradient { block: &'static str, timestep: usize },

    #[error("value {value} is not on the quantization grid")]
    OffGrid { value: f64 },

    #[error("pruning would remove every neuron of the {layer} layer")]
    EmptyLayer { layer: &'static str },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training diverged (loss {loss})")]
    Divergence { loss: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("unsupported or corrupt file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
