#![no_std]
// `!(x > 0.0)` is deliberate: NaN must fail the check. Tabulated nodes and
// frozen reference values keep all their digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]
//! Objective Bayes factors for testing a Poisson model against a
//! zero-inflated Poisson (ZIP) model.
//!
//! The crate covers the plain i.i.d. case, where the Bayes factor has a
//! closed form, and the log-linear regression case, where the marginal
//! likelihoods are computed by tensor Gauss–Legendre quadrature or seeded
//! importance sampling. Integrability of the improper regression priors is
//! checked mechanically before any integral is attempted, and designs whose
//! positive-count rows do not identify every coefficient are handled with a
//! partially proper prior.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command-line
//! front end live in the `zipbf` crate.

extern crate alloc;

pub mod error;
pub mod exact;
pub mod numerics;
pub mod priors;
pub mod rank_deficient;
pub mod regression;

pub use nalgebra;

pub use error::{Error, Result};
pub use exact::{
    log_bf_all_zeros, log_bf_gamma, log_bf_jeffreys, log_bf_l1, posterior_prob, summarize,
    BfResult, CountSummary, Method,
};
pub use numerics::{Backend, IntegrationConfig, LogEstimate};
pub use priors::{PartialPriorSpec, PriorSpec};
pub use rank_deficient::{average_bfs, log_bf_rank_deficient, RankDeficientResult};
pub use regression::{
    check_integrability, load_regression, log_bf_regression, log_marginal_m0, log_marginal_m1,
    IntegrabilityReport, RecommendedPrior, RegPrior, RegressionData,
};
