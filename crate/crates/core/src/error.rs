use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is not invertible at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("{what} is not symmetric positive definite at {point:?}")]
    NotPositiveDefinite { what: String, point: Vec<f64> },

    #[error("{what} is not symmetric at {point:?} (asymmetry {asymmetry:e})")]
    NotSymmetric {
        what: String,
        point: Vec<f64>,
        asymmetry: f64,
    },

    #[error("induced metric is degenerate and has no dual cometric")]
    DegenerateInducedMetric,

    #[error("field evaluation failed: {0}")]
    Evaluation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("actuator weight {index} must be positive, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("change-of-chart jacobian is singular")]
    SingularJacobian,

    #[error("point {point:?} lies outside the chart domain of `{system}`")]
    OutOfDomain { system: String, point: Vec<f64> },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("domain error at byte {offset}: {message}")]
    ExpressionDomain { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("asymmetric specification: entries ({row},{col}) and ({col},{row}) differ")]
    AsymmetricSpecification { row: usize, col: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples are not on a uniform, increasing time grid")]
    NonUniformGrid,

    #[error("integration diverged after t = {last_valid_time}: {cause}")]
    Diverged { last_valid_time: f64, cause: String },

    #[error("invalid boundary problem: {0}")]
    InvalidProblem(String),
}
