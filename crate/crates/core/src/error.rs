use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method ran out of budget before meeting its tolerance.
    /// `estimate` is the best value found so far.
    #[error("{what} did not converge (estimate {estimate:e}, error {abs_err:e})")]
    Convergence {
        what: &'static str,
        estimate: f64,
        abs_err: f64,
    },

    /// The alternating outage series lost too many significant digits.
    #[error("series cancellation: largest term {max_term:e} vs result {result:e}")]
    Precision { max_term: f64, result: f64 },

    /// Richardson extrapolants failed to settle.
    #[error("numerical differentiation unstable (order {order}, spread {spread:e})")]
    Unstable { order: usize, spread: f64 },

    /// Root bracket does not straddle a sign change.
    #[error("root not bracketed: g({lo}) = {g_lo:e}, g({hi}) = {g_hi:e}")]
    Bracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    /// An analytic path was asked to handle an EH model it was not derived for.
    #[error("operation requires the non-linear sigmoid EH model, got {0}")]
    ModelMismatch(&'static str),

    /// Curve fit could not produce a finite residual.
    #[error("curve fit failed: {0}")]
    Fit(String),

    /// An internal result fell outside its valid range by more than rounding.
    #[error("internal consistency: {0}")]
    Consistency(String),

    /// Malformed configuration or data file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::Precision { .. }
                | Error::Unstable { .. }
                | Error::Bracket { .. }
                | Error::Fit(_)
                | Error::Consistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
