//! Numerical kernels shared by the Bayes-factor modules.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub mod glm;
pub mod linalg;
pub mod mode;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use glm::poisson_mode;
pub use linalg::{nnls_feasible, rank_and_basis};
pub use montecarlo::{integrate_mc, integrate_mc_with, ChunkRunner, Proposal, SerialRunner};
pub use quadrature::{gauss_legendre, integrate_1d};
pub use special::{log_gamma, log_sum_exp};

/// Largest integration dimension for which the tensor quadrature backend is allowed.
pub const MAX_QUADRATURE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Backend {
    /// Quadrature when the dimension allows it, importance sampling otherwise.
    #[default]
    Auto,
    Quadrature,
    ImportanceSampling,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrationConfig {
    pub backend: Backend,
    pub mc_samples: usize,
    pub target_rel_se: f64,
    pub seed: u64,
    pub quad_rel_tol: f64,
    /// Half-width of the quadrature box, in standard deviations of the
    /// reference curvature.
    pub truncation_radius: f64,
    pub proposal_df: f64,
    pub proposal_scale_inflation: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            mc_samples: 65536,
            target_rel_se: 0.02,
            seed: 0,
            quad_rel_tol: 1e-9,
            truncation_radius: 30.0,
            proposal_df: 5.0,
            proposal_scale_inflation: 1.2,
        }
    }
}

impl IntegrationConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_mc_samples(mut self, n: usize) -> Self {
        self.mc_samples = n;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.truncation_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < 1024 {
            return Err(Error::Domain(format!("mc_samples must be at least 1024, got {}", self.mc_samples)));
        }
        if !(self.target_rel_se > 0.0 && self.target_rel_se < 1.0) {
            return Err(Error::Domain(format!("target_rel_se must lie in (0, 1), got {}", self.target_rel_se)));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1.0) {
            return Err(Error::Domain(format!("quad_rel_tol must lie in (0, 1), got {}", self.quad_rel_tol)));
        }
        if !(self.truncation_radius > 0.0) || !self.truncation_radius.is_finite() {
            return Err(Error::Domain(format!("truncation_radius must be positive, got {}", self.truncation_radius)));
        }
        if !(self.proposal_df > 0.0) || !self.proposal_df.is_finite() {
            return Err(Error::Domain(format!("proposal_df must be positive, got {}", self.proposal_df)));
        }
        if !(self.proposal_scale_inflation >= 1.0) || !self.proposal_scale_inflation.is_finite() {
            return Err(Error::Domain(format!(
                "proposal_scale_inflation must be at least 1, got {}",
                self.proposal_scale_inflation
            )));
        }
        Ok(())
    }

    /// Concrete backend for an integral of dimension `dim`.
    pub fn resolve_backend(&self, dim: usize) -> Result<Backend> {
        self.validate()?;
        match self.backend {
            Backend::Auto if dim <= MAX_QUADRATURE_DIM => Ok(Backend::Quadrature),
            Backend::Auto => Ok(Backend::ImportanceSampling),
            Backend::Quadrature if dim > MAX_QUADRATURE_DIM => Err(Error::Domain(format!(
                "quadrature backend supports at most {MAX_QUADRATURE_DIM} dimensions, integral has {dim}"
            ))),
            b => Ok(b),
        }
    }
}

/// Logarithm of an integral together with its Monte Carlo relative error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogEstimate {
    pub log_value: f64,
    /// Relative standard error of the integral; zero for deterministic quadrature.
    pub rel_se: f64,
    pub n_evals: usize,
    /// Effective sample size of the importance weights, when sampling was used.
    pub ess: Option<f64>,
    pub warnings: Vec<String>,
}

impl LogEstimate {
    pub(crate) fn deterministic(log_value: f64, n_evals: usize) -> Self {
        Self { log_value, rel_se: 0.0, n_evals, ess: None, warnings: Vec::new() }
    }

    pub fn is_divergent(&self) -> bool {
        !self.log_value.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = IntegrationConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mc_samples, 65536);
        assert_eq!(cfg.resolve_backend(2).unwrap(), Backend::Quadrature);
        assert_eq!(cfg.resolve_backend(4).unwrap(), Backend::ImportanceSampling);
    }

    #[test]
    fn invariants_enforced() {
        assert!(IntegrationConfig::default().with_mc_samples(1000).validate().is_err());
        let quad = IntegrationConfig::default().with_backend(Backend::Quadrature);
        assert!(quad.resolve_backend(3).is_ok());
        assert!(quad.resolve_backend(4).is_err());
        let cfg = IntegrationConfig { proposal_scale_inflation: 0.9, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
