use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid partial matrix: {0}")]
    InvalidData(String),

    #[error("pattern does not have the form {expected}")]
    ClassMismatch { expected: String },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("clique search exceeded the node budget of {budget}")]
    CapExceeded { budget: usize },

    #[error("leading coefficient a_0 must be {0}")]
    BadLeadingCoefficient(&'static str),

    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("polynomial has a root in the closed unit disk")]
    RootsInsideDisk,

    #[error("root location is numerically indeterminate (smallest Bezoutian eigenvalue {0:e})")]
    IndeterminateRoots(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("partial matrix has no positive definite completion (smallest eigenvalue reached {lambda_min:e})")]
    NotStrictlyFeasible { lambda_min: f64 },

    #[error("partial matrix has no positive semidefinite completion (smallest eigenvalue reached {lambda_min:e})")]
    NotPsdCompletable { lambda_min: f64 },

    #[error("{stage} subproblem failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("no convergence after {iterations} iterations (Newton decrement^2 = {decrement:e})")]
    MaxIterations { iterations: usize, decrement: f64 },

    #[error("central path diverged at alpha = {alpha:e}")]
    PathDivergence { alpha: f64 },

    #[error("inverse does not have the expected structure: {0}")]
    StructureViolation(String),

    #[error("result is not Toeplitz (deviation {deviation:e})")]
    NotToeplitz { deviation: f64 },

    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn class_mismatch(expected: &str) -> Self {
        Error::ClassMismatch {
            expected: expected.to_string(),
        }
    }

    /// Stable machine-readable tag, used for the CLI's error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPattern(_) => "invalid_pattern",
            Error::InvalidData(_) => "invalid_data",
            Error::ClassMismatch { .. } => "class_mismatch",
            Error::OutOfRange(_) => "out_of_range",
            Error::Shape(_) => "shape",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::BadLeadingCoefficient(_) => "bad_leading_coefficient",
            Error::ZeroPolynomial => "zero_polynomial",
            Error::RootsInsideDisk => "roots_inside_disk",
            Error::IndeterminateRoots(_) => "indeterminate_roots",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::NotStrictlyFeasible { .. } => "not_strictly_feasible",
            Error::NotPsdCompletable { .. } => "not_psd_completable",
            Error::Stage { source, .. } => source.kind(),
            Error::MaxIterations { .. } => "max_iterations",
            Error::PathDivergence { .. } => "path_divergence",
            Error::StructureViolation(_) => "structure_violation",
            Error::NotToeplitz { .. } => "not_toeplitz",
            Error::Internal(_) => "internal",
        }
    }

    /// True when the error means the input data admits no (strictly) feasible completion.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::NotStrictlyFeasible { .. } | Error::NotPsdCompletable { .. } => true,
            Error::Stage { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
