use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("load current must be positive, got {0} A")]
    NonPositiveCurrent(f64),

    #[error("stack temperature {t_st0} °C must exceed coolant inlet temperature {t_in} °C")]
    DegenerateOperatingPoint { t_st0: f64, t_in: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reference model matrix is not Hurwitz (trace {trace}, det {det})")]
    NotHurwitz { trace: f64, det: f64 },

    #[error("matrix `{0}` is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    #[error(
        "initial condition is infeasible for the governor: V = {v} exceeds threshold Gamma = {gamma}"
    )]
    InitiallyInfeasible { v: f64, gamma: f64 },

    #[error("non-finite value in {what} at t = {t} s")]
    NonFinite { what: &'static str, t: f64 },

    #[error("state `{name}` = {value} left the sanity bound {bound} at t = {t} s")]
    BoundExceeded {
        name: &'static str,
        value: f64,
        bound: f64,
        t: f64,
    },

    #[error("scenarios are not comparable: {0}")]
    Incomparable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
