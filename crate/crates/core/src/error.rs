use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    /// Every count is zero, so the ZIP marginal under an improper prior on
    /// the Poisson mean is infinite.
    #[error("all {n} counts are zero: the zero-inflated marginal is infinite under an improper prior; use log_bf_all_zeros with a proper Gamma prior")]
    AllZeros { n: usize },

    #[error("design matrix has rank {rank}, expected full column rank {q}")]
    DesignRank { rank: usize, q: usize },

    /// The chosen regression prior is not known to give a finite marginal.
    #[error("integrability check failed: {0}")]
    Integrability(String),

    /// Caller routed the data to the wrong computation.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("partial prior construction failed: {0}")]
    Construction(String),

    /// An integrator ran out of budget before reaching its tolerance.
    #[error("accuracy target not met ({message}); best log estimate {estimate}")]
    Accuracy { estimate: f64, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}
