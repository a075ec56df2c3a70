use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("invalid plane parameters: {0}")]
    InvalidPlane(String),
    #[error("frame index {index} out of range (volume has {frames} frames)")]
    FrameOutOfRange { index: usize, frames: usize },
    #[error("requested {requested} candidates but the orientation x offset grid holds at most {max}")]
    TooManyCandidates { requested: usize, max: usize },
    #[error("phantom requests {requested} classes but only {available} pattern templates exist")]
    TooManyClasses { requested: usize, available: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("sequence too short: {frames} frames, need at least {min}")]
    SequenceTooShort { frames: usize, min: usize },
    #[error("descriptor window lies entirely outside the image or sequence")]
    WindowOutside,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} distinct descriptors, found {found}")]
    NotEnoughDescriptors { needed: usize, found: usize },
    #[error("rank deficiency: {view} covariance has rank {rank} < code length {code_len}; use epsilon > 0")]
    RankDeficient { view: &'static str, rank: usize, code_len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("class {0} has no positive training samples")]
    NoPositives(usize),
    #[error("negative entry {value} at index {index}; histogram intersection needs nonnegative inputs")]
    NegativeEntry { index: usize, value: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
