use thiserror::Error;

/// Errors raised by model construction, design and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid agent count {0}")]
    InvalidAgentCount(usize),

    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("edge list parse error at line {line}: {message}")]
    EdgeListParse { line: usize, message: String },

    #[error("agent {agent}: expected {expected} entries, got {actual}")]
    DimensionMismatch {
        agent: usize,
        expected: usize,
        actual: usize,
    },

    #[error("expected one behavior per agent ({expected}), got {actual}")]
    BehaviorCount { expected: usize, actual: usize },

    #[error("action {value} on link {from}->{to} outside [0, 1]")]
    ActionOutOfRange { from: usize, to: usize, value: f64 },

    #[error("operation requires a sum-form benefit")]
    NotSumForm,

    #[error("design did not converge within {iterations} iterations (last multiplier change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        trace: Vec<Vec<f64>>,
    },

    #[error("strategy violates incentive constraints: {0:?}")]
    Infeasible(Vec<AgentSlack>),

    #[error("no feasible binary protocol for agent {agent}: benefit {benefit} does not exceed cost {cost}")]
    DegenerateBounds { agent: usize, benefit: f64, cost: f64 },

    #[error("stationary fraction undefined for alpha = beta = 0 with positive error")]
    UndefinedStationary,

    #[error("discounted values diverge at delta = 1; use average-reward mode")]
    UndiscountedValues,

    #[error("rating chain for agent {0} has no unique recurrent class")]
    MultichainRating(usize),

    #[error("protocol shape mismatch: {0}")]
    ProtocolShape(String),

    #[error("refresh rate must be positive")]
    ZeroRefreshRate,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Incentive slack of one agent: `delta * b_i - ||sigma_i||_1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgentSlack {
    pub agent: usize,
    pub slack: f64,
}

pub type Result<T> = std::result::Result<T, Error>;
