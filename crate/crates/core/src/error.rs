use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside the domain of {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("unphysical covariance matrix: {0}")]
    Unphysical(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cloner variance is singular for a lossless channel (T = 1)")]
    LosslessSingularity,

    #[error("no positive key rate at {distance_km} km even without excess noise")]
    NoPositiveRate { distance_km: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("target amplitude {target} exceeds reachable amplitude {reachable}")]
    Unreachable { target: f64, reachable: f64 },

    #[error("objective is flat; no correlation to optimise the gain against")]
    DegenerateOptimum,

    #[error("displacement convention violated: <p_A p_B> = {pp}, expected about -{xx} (tolerance {tolerance})")]
    ConventionViolation { xx: f64, pp: f64, tolerance: f64 },
}
