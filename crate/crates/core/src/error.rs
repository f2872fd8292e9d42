use thiserror::Error;

/// Errors produced by the model, optimizers and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument {s} is outside the MGF domain {domain}")]
    MgfDomain { s: f64, domain: String },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error(
        "quadrature did not converge: estimate {estimate}, achieved error {achieved:e} \
         (tolerance {tolerance:e})"
    )]
    Quadrature {
        estimate: f64,
        achieved: f64,
        tolerance: f64,
    },

    #[error("bankruptcy at mark {index} (t = {time}, y = {mark}): 1 + pi f = {factor}")]
    Bankruptcy {
        index: usize,
        time: f64,
        mark: f64,
        factor: f64,
    },

    #[error("wealth is exhausted by consumption at t = {time}")]
    Ruin { time: f64 },

    #[error("target {target} is outside the attainable h-range [{low}, {high}]")]
    Range { target: f64, low: f64, high: f64 },

    #[error("model assumption violated: {0}")]
    Assumption(String),

    #[error("no optimal portfolio: {0}")]
    Infeasible(String),

    #[error("zeta = {zeta} lies outside the effective domain {domain}{}", at.map(|t| format!(" (first exit at t = {t})")).unwrap_or_default())]
    OutsideDomain {
        zeta: f64,
        domain: String,
        at: Option<f64>,
    },

    #[error("degenerate generator: lambda0 + lambda1 must be positive")]
    DegenerateGenerator,

    #[error("regime-value conditions failed: {0}")]
    Conditions(String),
}

impl Error {
    /// True for errors that mean the model admits no optimal policy, as
    /// opposed to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Range { .. }
                | Error::Assumption(_)
                | Error::Infeasible(_)
                | Error::Conditions(_)
                | Error::OutsideDomain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
