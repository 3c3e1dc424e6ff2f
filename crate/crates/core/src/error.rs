use std::fmt;

/// Shape of a two-dimensional operand, printed as `rows×cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}", self.0, self.1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left} and {right}")]
    Dimension {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },

    #[error("{0}")]
    Parameter(String),

    #[error("label {label} at row {row} outside [0, {classes})")]
    Label { row: usize, label: i64, classes: usize },

    #[error("{op}: degenerate input at row {row}")]
    Degenerate { op: &'static str, row: usize },

    #[error("tape: {0}")]
    Tape(String),

    #[error("{0}")]
    Contract(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("length mismatch: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },

    #[error("class {class} has {available} rows but {required} are required")]
    Stratification {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("training diverged at step {step}: {source}")]
    Divergence {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable, machine-parsable category used as the CLI error prefix.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::NonFinite { .. } => "numeric",
            Error::Parameter(_) => "parameter",
            Error::Label { .. } => "label",
            Error::Degenerate { .. } => "degenerate",
            Error::Tape(_) => "tape",
            Error::Contract(_) => "contract",
            Error::Format { .. } => "format",
            Error::Length { .. } => "length",
            Error::Stratification { .. } => "stratification",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension {
            op,
            left: Shape(left.0, left.1),
            right: Shape(right.0, right.1),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
