use thiserror::Error;

/// Failures of an experiment run, grouped by what the user has to fix.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("output error: {0}")]
    Output(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Evaluation(_) => 4,
            Self::Output(_) => 1,
        }
    }

    /// Wrap a learner error, keeping `context` in the message.
    pub fn from_core(context: impl std::fmt::Display, err: stam::Error) -> Self {
        use stam::Error as E;
        let msg = format!("{context}: {err}");
        match err {
            E::Config(_) | E::Argument(_) => Self::Config(msg),
            E::Format(_) | E::Length { .. } | E::Shape(_) | E::Init(_) | E::Io(_) => {
                Self::Data(msg)
            }
            E::State(_) | E::Contract(_) | E::Evaluation(_) | E::Fit(_) => Self::Evaluation(msg),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
