use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArtaError>;

#[derive(Debug, Error)]
pub enum ArtaError {
    /// Shape mismatches, invalid hyperparameters, unknown config keys.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    /// A loss, gradient or activation stopped being finite.
    #[error("numeric error in {op}: {message}")]
    Numeric { op: &'static str, message: String },

    /// A metric is undefined for the given ground truth (e.g. single-class labels).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ArtaError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ArtaError::Config(msg.into())
    }

    pub(crate) fn numeric(op: &'static str, msg: impl Into<String>) -> Self {
        ArtaError::Numeric {
            op,
            message: msg.into(),
        }
    }
}

impl From<csv::Error> for ArtaError {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => ArtaError::Format(format!(
                "ragged row {}: expected {expected_len} fields, found {len}",
                pos.as_ref().map(|p| p.line()).unwrap_or(0)
            )),
            _ => ArtaError::Format(err.to_string()),
        }
    }
}
