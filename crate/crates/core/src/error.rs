use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("integration failed at tau = {tau}: {reason}")]
    IntegrationFailure { tau: f64, reason: String },

    #[error("inconsistent routes: {what} differ by {deviation:.3e} (bound {bound:.3e})")]
    Inconsistency {
        what: String,
        deviation: f64,
        bound: f64,
    },

    #[error("not asymptotic: {0}")]
    NotAsymptotic(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("tau = {tau} outside [{start}, {end}]")]
    Range { tau: f64, start: f64, end: f64 },

    #[error("truncated support: edge mass {edge_mass:.3e}")]
    TruncatedSupport { edge_mass: f64 },

    #[error("asymptotic limit not reached: values vary by {variation:.3e}")]
    LimitNotReached { variation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too small: edge mass {edge_mass:.3e} at tau = {tau}")]
    GridTooSmall { edge_mass: f64, tau: f64 },

    #[error("time step too large: norm drift {drift:.3e}")]
    StepTooLarge { drift: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
