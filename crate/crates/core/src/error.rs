use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition on an argument does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// A system or parameter combination that is not allowed.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: &'static str, message: String },

    /// The requested closed form does not exist in this limit.
    #[error("unsupported limit: {0}")]
    UnsupportedLimit(String),

    /// A measure-zero separatrix case (vanishing constant of motion).
    #[error("degenerate constants: {0}")]
    Degenerate(String),

    /// Initial data lies outside the range of the kink/tanh branch.
    #[error("branch fit failed: {0}")]
    BranchFit(String),

    /// The closed-form orbit reaches a pole (finite-time blow-up).
    #[error("closed-form solution is singular at t = {t}")]
    Singular { t: f64 },

    /// Adaptive step size collapsed.
    #[error("step size underflow (h = {h:e}) at t = {t}; the problem looks stiff")]
    StepUnderflow { t: f64, h: f64 },

    /// The state stopped being finite.
    #[error("non-finite state at t = {t}")]
    Divergence { t: f64 },

    /// Period measurement found no recurrence.
    #[error("no recurrence found: {0}")]
    Aperiodic(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::StepUnderflow { .. }
                | Error::Divergence { .. }
                | Error::Aperiodic(_)
        )
    }
}
