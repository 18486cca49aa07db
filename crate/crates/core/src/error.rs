use thiserror::Error;

use crate::nonlinearity::MonomialIndex;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document is malformed; `field` names the offending entry.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("nonlinearity violates the weak condition: monomial {0} is excluded")]
    WeakCondition(MonomialIndex),

    /// A precondition of an operation does not hold.
    #[error("{0}")]
    Domain(String),

    #[error("past blow-up at t = {t}: denominator {denominator:.6e} is not positive")]
    PastBlowUp { t: f64, denominator: f64 },

    #[error("numerical blow-up at t = {t}: magnitude {magnitude:.6e} exceeds ceiling")]
    BlowUp { t: f64, magnitude: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
