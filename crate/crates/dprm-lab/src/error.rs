use crate::transport::SinkhornIterate;

/// Error variants shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution vector could not be normalized onto the simplex.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Schema rows failed validation (ids, rewards, arity).
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    /// An aggregation or posterior update was attempted on an empty group.
    #[error("empty group: {0}")]
    EmptyGroup(&'static str),

    /// Targeted smoothing (strict mode) received a distribution that is not one-hot.
    #[error("distribution is not degenerate (one-hot): max entry {max:.6}")]
    NotDegenerate { max: f64 },

    /// Vector/matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A transport marginal fails the simplex invariant.
    #[error("infeasible transport input: {0}")]
    InfeasibleInput(String),

    /// Sinkhorn hit the iteration cap before reaching the marginal tolerance.
    /// The last iterate is carried so budget-bounded callers can still use it.
    #[error("sinkhorn did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Box<SinkhornIterate>,
    },

    /// The exact solver exceeded its pivot budget. Not expected in practice.
    #[error("exact transport solver stalled after {0} pivots")]
    SolverStall(usize),

    /// Featurization requires a non-empty response.
    #[error("empty response for record {0:?}")]
    EmptyResponse(String),

    /// Training or evaluation over an empty dataset.
    #[error("empty dataset")]
    EmptyDataset,

    /// KL(p||q) is undefined: q has zero mass where p does not.
    #[error("support mismatch: q[{index}] = 0 but p[{index}] = {p:.6}")]
    SupportMismatch { index: usize, p: f64 },

    /// A negative KL estimate was passed where a divergence is required.
    #[error("negative KL value: {0}")]
    NegativeKL(f64),

    /// PPO update invoked with an empty batch.
    #[error("empty rollout batch")]
    EmptyBatch,

    /// A remote or synthetic annotator returned an unusable answer.
    /// `completed_pairs` lets dataset generation report how far it got
    /// before aborting.
    #[error("annotator client failure: {message}")]
    ClientFailure {
        message: String,
        completed_pairs: usize,
    },

    /// Bad parameter value (order p, alpha, epsilon, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed input file; carries the 1-based line number when known.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
