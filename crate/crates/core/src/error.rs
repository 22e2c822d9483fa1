use std::path::PathBuf;

/// Errors produced anywhere in the detector toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("box has zero area after rasterization")]
    ZeroAreaBox,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("frames have mixed dimensions: {first:?} vs {other:?} ({path})")]
    MixedDimensions {
        first: (usize, usize),
        other: (usize, usize),
        path: PathBuf,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("directory contains no frames: {0}")]
    EmptyDirectory(PathBuf),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("frame {index} out of range (sequence has {len} frames)")]
    FrameOutOfRange { index: usize, len: usize },
    #[error("training instance has no candidates")]
    EmptyCandidates,
    #[error("training set has no positive instances")]
    NoPositives,
    #[error("training set has no negative instances")]
    NoNegatives,
    #[error("objective became non-finite during training")]
    NonFiniteObjective,
    #[error("graph has no labeled vertices")]
    NoLabeledVertices,
    #[error("feature vector contains non-finite values")]
    DegenerateFeatures,
    #[error("no samples to evaluate")]
    EmptySamples,
    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("video has {got} frames, need at least {need}")]
    InsufficientFrames { need: usize, got: usize },
    #[error("no proposals survived the motion gate (static video or bg_threshold too high)")]
    NoProposalsSurvived,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
