use thiserror::Error;

/// Errors raised by the analytic models, optimizer and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the domain of {function}")]
    Domain {
        function: &'static str,
        name: &'static str,
        value: f64,
    },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("thresholds must be finite, positive and strictly increasing (got {0:?})")]
    UnorderedThresholds(Vec<f64>),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error {error:e})"
    )]
    Convergence {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("integrand returned a non-finite value at x = {0}")]
    NonFiniteIntegrand(f64),

    #[error("policy and sensing model disagree: {0}")]
    ModeMismatch(String),

    #[error("full grid needs {evaluations} evaluations, budget is {budget}")]
    Dimensionality { evaluations: u128, budget: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_param(ok: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
