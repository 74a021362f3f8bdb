use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a zero-forcing beamforming problem has no solution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error(
        "not enough transmit degrees of freedom: {streams} streams need at least {streams} antennas, array has {antennas}"
    )]
    DegreesOfFreedom { streams: usize, antennas: usize },
    #[error(
        "composite channel is rank deficient (pivot ratio {pivot_ratio:.3e}); streams cannot be separated by nulling"
    )]
    RankDeficient { pivot_ratio: f64 },
    #[error("stream {stream} has zero gain along its own zero-forcing direction")]
    ZeroGain { stream: usize },
    #[error("minimum-power solution needs {required:.6e} W but the budget is {budget:.6e} W")]
    PowerBudget { required: f64, budget: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    #[error("matrix is singular to working precision (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },
    #[error("infeasible: {0}")]
    Infeasible(#[from] Infeasibility),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("replay buffer holds {have} transitions, {need} requested")]
    InsufficientSamples { have: usize, need: usize },
    #[error("no users placed after {attempts} attempts")]
    EmptyScenario { attempts: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
