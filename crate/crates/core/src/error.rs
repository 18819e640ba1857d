use thiserror::Error;

/// Errors raised by the pricing, hedging and calibration engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("{what} = {value} outside domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("arbitrage step model: risk-neutral probability {0} not in (0, 1)")]
    ArbitrageStepModel(f64),

    #[error("degenerate down factor {0} (must be > 0)")]
    DegenerateDownFactor(f64),

    #[error("node index out of range: step {step}, node {node}")]
    NodeOutOfRange { step: usize, node: usize },

    #[error("near-singular correlation: {0}")]
    NearSingularCorrelation(String),

    #[error("co-linear risk loadings: |sigma1*gamma2 - gamma1*sigma2| = {value:e} at t = {time}")]
    ColinearLoadings { value: f64, time: f64 },

    #[error("insufficient observations: got {got}, need at least {need}")]
    InsufficientObservations { got: usize, need: usize },

    #[error("degenerate up-probability {0} (must lie in (0, 1))")]
    DegenerateUpProbability(f64),

    #[error("zero-variance series")]
    ZeroVariance,

    #[error("invalid payoff: {0}")]
    InvalidPayoff(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
