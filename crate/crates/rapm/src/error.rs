use crate::solvers::IterateTrace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "power iteration did not converge within {iterations} iterations \
         (last estimate {last_estimate:e})"
    )]
    PowerIterationNonConvergence {
        iterations: usize,
        last_estimate: f64,
    },

    #[error("step size {gamma:e} exceeds the stability bound 1/L = {bound:e}")]
    StepTooLarge { gamma: f64, bound: f64 },

    #[error("ground truth required: {0}")]
    MissingGroundTruth(&'static str),

    #[error("iterate non-finite or diverged at k = {at_k}; partial trace retained")]
    Divergence {
        at_k: usize,
        partial: Box<IterateTrace>,
    },

    #[error("trace unsuitable for certification: {0}")]
    TraceUnsuitable(String),

    #[error("problem identity mismatch: trace/reference built for `{left}`, got `{right}`")]
    ProblemMismatch { left: String, right: String },

    #[error("rate estimation needs at least 5 usable tail points, found {found}")]
    TooFewRatePoints { found: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}{}: {message}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    CsvParse {
        path: String,
        row: usize,
        col: Option<usize>,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(context: &str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            got,
        }
    }
}
