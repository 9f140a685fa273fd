use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid video: {0}")]
    InvalidVideo(String),

    #[error("{format}: bad magic {found:?}")]
    BadMagic { format: &'static str, found: [u8; 4] },

    #[error("{format}: unsupported version {version}")]
    UnsupportedVersion { format: &'static str, version: u32 },

    #[error("{format}: truncated input ({context})")]
    Truncated { format: &'static str, context: String },

    #[error("{format}: malformed input ({detail})")]
    Malformed { format: &'static str, detail: String },

    #[error("layer {layer:?}: {detail}")]
    LayerShape { layer: String, detail: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("frames smaller than 3x3 ({h}x{w})")]
    FrameTooSmall { h: usize, w: usize },

    #[error("degenerate network: all Lipschitz bounds are zero")]
    DegenerateNetwork,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no manipulable flows")]
    NoManipulableFlows,

    #[error("state is owned by {actual}, expected {expected}")]
    WrongOwner {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("inconsistent game path: {0}")]
    InconsistentPath(String),

    #[error("strategy distribution is not normalized (sum {0})")]
    BadDistribution(f64),

    #[error("search space exceeds {limit} leaf evaluations")]
    SearchSpaceTooLarge { limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
