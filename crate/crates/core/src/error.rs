use std::fmt;

/// Errors raised anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Parameter tables of two networks disagree.
    #[error("checkpoint error: {0}")]
    TensorMismatch(TensorMismatch),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command line: 2 for configuration and
    /// validation problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Names that are missing from, unexpected in, or shaped differently in a
/// source tensor table relative to the network it is applied to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TensorMismatch {
    pub missing: Vec<String>,
    pub unexpected: Vec<String>,
    pub reshaped: Vec<String>,
}

impl TensorMismatch {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty() && self.reshaped.is_empty()
    }
}

impl fmt::Display for TensorMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing tensors [{}]", self.missing.join(", ")));
        }
        if !self.unexpected.is_empty() {
            parts.push(format!("unexpected tensors [{}]", self.unexpected.join(", ")));
        }
        if !self.reshaped.is_empty() {
            parts.push(format!("shape mismatch [{}]", self.reshaped.join(", ")));
        }
        write!(f, "{}", parts.join("; "))
    }
}
