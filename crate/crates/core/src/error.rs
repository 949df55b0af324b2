use thiserror::Error;

pub type Result<T, E = MvmnpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MvmnpError {
    #[error("invalid choice structure: {0}")]
    InvalidStructure(String),

    #[error("dimension mismatch at observation {obs}, choice {choice}: {detail}")]
    DimensionMismatch {
        obs: usize,
        choice: usize,
        detail: String,
    },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix not positive definite after jitter {jitter:e} (min diagonal {min_diag:e}, max diagonal {max_diag:e})")]
    NotPositiveDefinite {
        jitter: f64,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("latent state inconsistent with observed choice at observation {obs}, choice {choice}")]
    InconsistentLatent { obs: usize, choice: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimizer diverged at iteration {iteration}: |lambda| reached {max_abs:e} at index {index}")]
    Diverged {
        iteration: usize,
        index: usize,
        max_abs: f64,
    },

    #[error("{phase} failed at iteration {iteration}: {source}")]
    AtIteration {
        phase: &'static str,
        iteration: usize,
        #[source]
        source: Box<MvmnpError>,
    },

    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MvmnpError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        MvmnpError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, phase: &'static str, iteration: usize) -> Self {
        MvmnpError::AtIteration {
            phase,
            iteration,
            source: Box::new(self),
        }
    }
}
