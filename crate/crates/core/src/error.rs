use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The point (or pair of points) lies outside the model's admissible set.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {what} at entry ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A model returned a value that breaks its own contract (e.g. negative energy).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("singular pivot in block {block} of the {stage} system")]
    SingularPivot { stage: &'static str, block: usize },

    #[error("{stage}: no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Failure inside an iterated construction, tagged with the step index.
    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Failure inside a named stage of a composite operator.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// Failure of one operator at one resolution during a convergence study.
    #[error("K = {k}, {operator}: {source}")]
    Study {
        k: usize,
        operator: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    /// Whether the error stems from a numerical solve (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NotConverged { .. } | Error::SingularPivot { .. } | Error::Domain(_) => true,
            Error::Step { source, .. } | Error::Stage { source, .. } | Error::Study { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
