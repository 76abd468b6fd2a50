use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("word of length {len} exceeds tree depth {depth}")]
    DepthExceeded { len: usize, depth: usize },

    #[error("conditional measure undefined: cylinder `{word}` has zero mass")]
    UndefinedConditional { word: String },

    #[error("infinite information: symbol {symbol} has zero conditional probability after `{word}`")]
    InfiniteInformation { word: String, symbol: u8 },

    #[error("partition operator `{op}` expects a cube, got sides {sides:?}")]
    NonCube { op: &'static str, sides: Vec<f64> },

    #[error("eccentricity parameter w = {w} outside [0, log 3)")]
    WOutOfRange { w: f64 },

    #[error("degenerate box: side {side} on axis {axis}")]
    DegenerateBox { axis: usize, side: f64 },

    #[error("no exact tree representation for this spec: {reason}")]
    UnsupportedExact { reason: String },

    #[error("strong separation violated: images {a} and {b} of the hull intersect")]
    SeparationViolated { a: usize, b: usize },

    #[error("grid resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: String, right: String },

    #[error("insufficient resolution: measure resolved to level {have}, need level {need}")]
    InsufficientResolution { have: u32, need: u32 },

    #[error("transition masses sum to {sum}, deficit exceeds 1e-9")]
    MassDeficit { sum: f64 },

    #[error("lifting failed at word `{word}`: no child cube contains the image")]
    CoverViolation { word: String },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn word_string(word: &[u8]) -> String {
    word.iter().map(|d| {
        // symbols beyond 9 are printed in brackets
        if *d < 10 { char::from(b'0' + d).to_string() } else { format!("[{d}]") }
    }).collect()
}
