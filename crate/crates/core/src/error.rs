use thiserror::Error;

/// Errors raised by samplers, models and file IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("intensity exceeds dominating rate: lambda({t}) = {intensity} > lambda_max = {lambda_max}")]
    DominatingRateViolated { t: f64, intensity: f64, lambda_max: f64 },

    #[error(
        "observation has zero likelihood: x_obs = {x_obs} with lambda_obs = {lambda_obs}, lambda_max = {lambda_max}"
    )]
    ImpossibleObservation {
        x_obs: bool,
        lambda_obs: f64,
        lambda_max: f64,
    },

    #[error("intensity is unbounded on [0, {horizon}]")]
    Unbounded { horizon: f64 },

    #[error("event {index} is out of order or outside [0, {horizon}]")]
    InvalidSequence { index: usize, horizon: f64 },

    #[error("zero total intensity at observed event t = {t}")]
    ZeroIntensityAtEvent { t: f64 },

    #[error("node {node} is not in the network ({nodes} nodes)")]
    UnknownNode { node: usize, nodes: usize },

    #[error("unknown district `{0}`")]
    UnknownDistrict(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN and negative values.
pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {value}")))
    }
}
