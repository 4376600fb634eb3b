use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate pair ({i}, {j}) for dimension {dim}")]
    InvalidCoordinate { i: usize, j: usize, dim: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not orthogonal: defect {defect:e} exceeds {tolerance:e}")]
    NotOrthogonal { defect: f64, tolerance: f64 },

    #[error("non-finite objective value at theta = {theta}")]
    NonFinite { theta: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate penalty: gamma {gamma} >= largest row norm {max_row_norm}, objective is identically zero")]
    DegeneratePenalty { gamma: f64, max_row_norm: f64 },

    #[error("insufficient data: need {needed} samples, only {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("tensor is not symmetric: max asymmetry {max_asymmetry:e}")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("rank deficient: need {needed} eigenvalues above {tolerance:e}, found {found} (eigenvalue {needed} is {gap:e})")]
    RankDeficient {
        needed: usize,
        found: usize,
        tolerance: f64,
        gap: f64,
    },

    #[error("parameter recovery failed for components {0:?}")]
    Recovery(Vec<usize>),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: std::path::PathBuf,
        line: u64,
        message: String,
    },
}

impl Error {
    /// True for errors caused by the numerics rather than by inputs or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NotOrthogonal { .. } | Error::Recovery(_)
        )
    }
}
