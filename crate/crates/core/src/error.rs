use thiserror::Error;

/// Failures raised by the numerical pipelines.
///
/// Variants are grouped by the exit-code family the command-line front end
/// maps them to: input/model errors, numerical failures, and
/// internal-consistency errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian: entry ({row},{col}) deviates by {deviation:.3e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("form is not positive definite at grid point {point}")]
    FieldNotPositiveDefinite { point: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite value at grid point {point}")]
    NonFinite { point: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no admissible shift k <= {k_max}")]
    SearchExhausted { k_max: u32 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Newton iteration did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("damped Newton step failed: positivity or descent unrecoverable (residual {residual:.3e})")]
    StepFailure { residual: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("model violation: {0}")]
    Model(String),

    #[error("class is trivial")]
    Trivial,

    #[error("threshold search failed: {0}")]
    Threshold(String),

    #[error("region containment failed: {0}")]
    Containment(String),

    #[error("epsilon floor reached at level {level} (worst point {worst_point}, margin {margin:.3e})")]
    CombinationFailure { level: usize, worst_point: usize, margin: f64 },

    #[error("pipeline failure in region \"{region}\" at grid point {worst_point}: {detail}")]
    PipelineFailure { region: String, worst_point: usize, detail: String },

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
