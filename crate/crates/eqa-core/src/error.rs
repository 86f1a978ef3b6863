use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("scene parse error: {0}")]
    Parse(String),

    #[error("scene invariant violated ({invariant}): {detail}")]
    Invariant { invariant: String, detail: String },

    #[error("blocked path: no free segment toward ({x:.2}, {y:.2})")]
    BlockedPath { x: f64, y: f64 },

    #[error("zero vector passed to cosine relevance")]
    ZeroVector,

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("duplicate observation id {0} for target")]
    DuplicateObservation(u64),

    #[error("unknown target ({label}, {room})")]
    UnknownTarget { label: String, room: String },

    #[error("room not visible: {0}")]
    RoomNotVisible(String),

    #[error("no path between ({0:.2}, {1:.2}) and ({2:.2}, {3:.2})")]
    Unreachable(f64, f64, f64, f64),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("scorer endpoint error after {attempts} attempts: {detail}")]
    Endpoint { attempts: u32, detail: String },

    #[error("corpus generation failed after {attempts} attempts: {detail}")]
    Generation { attempts: u32, detail: String },

    #[error("question {0} not found in scene")]
    QuestionNotFound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code bucket: 2 for data problems, 3 for endpoint failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Endpoint { .. } => 3,
            _ => 2,
        }
    }
}
