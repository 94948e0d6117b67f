use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("svd of {rows}x{cols} matrix did not converge after {sweeps} sweeps (relative off-diagonal {residual:e})")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
        residual: f64,
    },

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid activation: {0}")]
    Activation(String),

    #[error("invalid skeleton {dims:?}: {reason}")]
    Skeleton { dims: Vec<usize>, reason: String },

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("tape node {node} ({op}): {detail}")]
    Tape {
        node: usize,
        op: &'static str,
        detail: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures caused by the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNoConvergence { .. } | Error::NonFiniteLoss { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
