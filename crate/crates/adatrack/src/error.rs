use thiserror::Error;

/// Errors produced by the tracking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no points")]
    NoPoints,
    #[error("patch too small: {width}x{height}, need at least {min}x{min}")]
    PatchTooSmall { width: usize, height: usize, min: usize },
    #[error("extent mismatch: {expected_w}x{expected_h} vs {got_w}x{got_h}")]
    ExtentMismatch { expected_w: usize, expected_h: usize, got_w: usize, got_h: usize },
    #[error("channel mismatch: {src} vs {dst}")]
    ChannelMismatch { src: usize, dst: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("box outside frame")]
    BoxOutsideFrame,
    #[error("box too small")]
    BoxTooSmall,
    #[error("tracker lost")]
    TrackerLost,
    #[error("template exceeds search region")]
    TemplateExceedsSearch,
    #[error("degenerate grid")]
    DegenerateGrid,
    #[error("deformation too large")]
    DeformationTooLarge,
    #[error("empty intersection")]
    EmptyIntersection,
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid flow file: {0}")]
    InvalidFlowFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
