use alloc::boxed::Box;
use alloc::string::String;

use crate::sim::SimRecord;

/// Errors raised by kernel assembly, observer design and simulation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A scalar or vector argument is outside the function's domain (NaN, infinite, negative width...).
    #[error("input domain error: {0}")]
    InputDomain(String),

    /// Mismatched vector or matrix dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("centers {first} and {second} coincide")]
    DuplicateCenters { first: usize, second: usize },

    #[error("Grammian not positive definite after jitter {jitter:e}; smallest eigenvalue estimate {min_eigenvalue:e}")]
    IllConditionedCenters { min_eigenvalue: f64, jitter: f64 },

    #[error("{context} is not Hurwitz: eigenvalue {re} + {im}i has nonnegative real part")]
    NotHurwitz {
        context: &'static str,
        re: f64,
        im: f64,
    },

    #[error("{context} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        context: &'static str,
        min_eigenvalue: f64,
    },

    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),

    /// A design-stage precondition failed.
    #[error("design error: {0}")]
    Design(String),

    #[error("kinematic singularity at t = {t}: pitch {theta} rad (eta = [{phi}, {theta}, {psi}])")]
    KinematicSingularity {
        t: f64,
        phi: f64,
        theta: f64,
        psi: f64,
    },

    /// The integrated state became non-finite. Carries the last finite record, if any.
    #[error("simulation diverged at t = {t}")]
    Divergence {
        t: f64,
        last_record: Option<Box<SimRecord>>,
    },

    /// The scenario itself is inconsistent (for example the measurement error exceeds its declared bound).
    #[error("scenario definition error: {0}")]
    Scenario(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InputDomain(alloc::format!("non-finite value in {context}")))
    }
}
