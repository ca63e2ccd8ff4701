use thiserror::Error;

/// Errors raised by the learner, the evaluation heads and the dataset layer.
#[derive(Debug, Error)]
pub enum Error {
    /// The byte stream is not the container it claims to be (bad magic, bad tag).
    #[error("format error: {0}")]
    Format(String),

    /// The byte stream ends before its header says it should.
    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    /// Incompatible dimensions (patch larger than image, wrong channel count, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid parameters or a request the data cannot satisfy.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough material to seed the short-term memories.
    #[error("initialization error: {0}")]
    Init(String),

    /// The model is in a state where the request has no answer (empty pool, no distances yet).
    #[error("state error: {0}")]
    State(String),

    /// A caller broke an API contract, e.g. updating a frozen long-term centroid.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Classification or clustering cannot be carried out.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Bad argument to a numerical routine.
    #[error("argument error: {0}")]
    Argument(String),

    /// Model fitting failed.
    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
