//! Poisson versus zero-inflated Poisson log-linear regression.
//!
//! Rates follow `ln λᵢ = a₀ᵢ + aᵢᵀβ`. Both models use the same improper prior
//! on β, either the Jeffreys prior `|Σ λᵢaᵢaᵢᵀ|^{1/2}` over every row (`J0`)
//! or the same determinant over the positive-count rows only (`J1`); the
//! zero-inflation probability gets a uniform prior. The β-integrals are done
//! on a tensor Gauss–Legendre box or by importance sampling, and the integral
//! over p is exact Gauss–Legendre because the integrand is a polynomial in p.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exact::{BfResult, Method};
use crate::numerics::glm::{poisson_mode, poisson_mode_augmented};
use crate::numerics::linalg::{cholesky_lower, nnls_feasible, rank};
use crate::numerics::mode::find_mode;
use crate::numerics::montecarlo::{integrate_mc_with, ChunkRunner, Proposal, SerialRunner};
use crate::numerics::quadrature::integrate_box;
use crate::numerics::special::{ln_factorial, log_add_exp, LogSumAccumulator};
use crate::numerics::{gauss_legendre, Backend, IntegrationConfig, LogEstimate};
use crate::priors::{log_rates, log_reg_jeffreys_from_rates};

/// Count regression data with the zero counts moved to the front.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    counts: Vec<u64>,
    design: DMatrix<f64>,
    offsets: Vec<f64>,
    permutation: Vec<usize>,
    n_zero: usize,
}

impl RegressionData {
    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn q(&self) -> usize {
        self.design.ncols()
    }

    /// Number of zero counts k; rows `0..k` are the zero rows.
    pub fn n_zero(&self) -> usize {
        self.n_zero
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `permutation()[i]` is the input row now stored at position i.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn log_factorial_product(&self) -> f64 {
        self.counts.iter().map(|&c| ln_factorial(c)).sum()
    }
}

/// Validate the inputs and reorder rows so that zero counts come first.
/// The reordering is stable within the zero and positive groups.
pub fn load_regression(counts: &[i64], design: DMatrix<f64>, offsets: Vec<f64>) -> Result<RegressionData> {
    let (n, q) = design.shape();
    if n == 0 || q == 0 {
        return Err(Error::Input("design matrix must have at least one row and one column".into()));
    }
    if counts.len() != n || offsets.len() != n {
        return Err(Error::Input(format!(
            "{} counts and {} offsets for a design with {n} rows",
            counts.len(),
            offsets.len()
        )));
    }
    if let Some(i) = counts.iter().position(|&c| c < 0) {
        return Err(Error::Input(format!("count in row {} is negative ({})", i + 1, counts[i])));
    }
    if let Some(i) = (0..n).find(|&i| !offsets[i].is_finite() || design.row(i).iter().any(|v| !v.is_finite())) {
        return Err(Error::Input(format!("row {} has a non-finite offset or covariate", i + 1)));
    }
    let r = rank(&design);
    if r < q {
        return Err(Error::DesignRank { rank: r, q });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by_key(|&i| counts[i] != 0);
    let n_zero = counts.iter().filter(|&&c| c == 0).count();
    Ok(RegressionData {
        counts: perm.iter().map(|&i| counts[i] as u64).collect(),
        design: DMatrix::from_fn(n, q, |r, c| design[(perm[r], c)]),
        offsets: perm.iter().map(|&i| offsets[i]).collect(),
        permutation: perm,
        n_zero,
    })
}

/// Which regression Jeffreys prior is used on β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegPrior {
    /// Determinant over every row.
    J0,
    /// Determinant over the positive-count rows only.
    #[default]
    J1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RecommendedPrior {
    J1,
    J0,
    Partial,
    None,
}

/// Cone-membership verdict for one zero-count row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZeroRowVerdict {
    /// Position in the input, zero-based.
    pub input_row: usize,
    /// Whether the row is a nonnegative combination of positive-count rows.
    pub in_cone: bool,
    /// Nonnegative least-squares coefficients over the positive-count rows.
    pub coefficients: Vec<f64>,
}

/// Finiteness diagnostics for the two regression priors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrabilityReport {
    pub n: usize,
    pub q: usize,
    pub k: usize,
    pub rank_a: usize,
    pub rank_a_plus: usize,
    /// Every zero-count row lies in the cone of the positive-count rows.
    /// Sufficient for a finite marginal under `J0`; when false the
    /// marginal may or may not be finite.
    pub j0_condition_ok: bool,
    pub zero_rows: Vec<ZeroRowVerdict>,
    /// Positive-count rows have full column rank: the marginal under `J1` is finite.
    pub j1_condition_ok: bool,
    pub recommended_prior: RecommendedPrior,
}

impl IntegrabilityReport {
    /// Input rows (zero-based) of the zero-count rows that fail the cone test.
    pub fn cone_failures(&self) -> Vec<usize> {
        self.zero_rows.iter().filter(|v| !v.in_cone).map(|v| v.input_row).collect()
    }

    pub fn allows(&self, j: RegPrior) -> bool {
        match j {
            RegPrior::J0 => self.j0_condition_ok,
            RegPrior::J1 => self.j1_condition_ok,
        }
    }
}

/// Tolerance for the cone-membership test.
pub const CONE_TOL: f64 = 1e-10;

pub fn check_integrability(data: &RegressionData) -> IntegrabilityReport {
    let (n, q, k) = (data.n(), data.q(), data.n_zero());
    let rank_a = rank(data.design());
    let rank_a_plus = if n > k { rank(&data.design().rows(k, n - k).into_owned()) } else { 0 };
    let basis: Vec<Vec<f64>> = (k..n).map(|m| data.design().row(m).iter().cloned().collect()).collect();
    let zero_rows: Vec<ZeroRowVerdict> = (0..k)
        .map(|i| {
            let target: Vec<f64> = data.design().row(i).iter().cloned().collect();
            let (in_cone, coefficients) = nnls_feasible(&target, &basis, CONE_TOL);
            ZeroRowVerdict { input_row: data.permutation()[i], in_cone, coefficients }
        })
        .collect();
    let j0_condition_ok = zero_rows.iter().all(|v| v.in_cone);
    let j1_condition_ok = rank_a_plus == q;
    // A₊ of full rank makes j1 finite, and the cone condition for j0 implies
    // it, so j0 is never the only finite choice.
    let recommended_prior = if j1_condition_ok {
        RecommendedPrior::J1
    } else if rank_a == q {
        RecommendedPrior::Partial
    } else {
        RecommendedPrior::None
    };
    IntegrabilityReport { n, q, k, rank_a, rank_a_plus, j0_condition_ok, zero_rows, j1_condition_ok, recommended_prior }
}

/// Gauss–Legendre rule on [0, 1] that integrates the ZIP p-polynomial exactly.
pub(crate) struct PRule {
    ln_p: Vec<f64>,
    ln_1mp: Vec<f64>,
    ln_w: Vec<f64>,
}

impl PRule {
    pub(crate) fn new(n: usize) -> Self {
        let m = (n + 1).div_ceil(2) + 1;
        let (x, w) = gauss_legendre(m);
        Self {
            ln_p: x.iter().map(|x| (0.5 * (1.0 + x)).ln()).collect(),
            ln_1mp: x.iter().map(|x| (0.5 * (1.0 - x)).ln()).collect(),
            ln_w: w.iter().map(|w| (0.5 * w).ln()).collect(),
        }
    }

    /// `ln ∫₀¹ ∏_{i<k} (p + (1−p)e^{−λᵢ}) (1−p)^{n_pos} dp`.
    pub(crate) fn log_integral(&self, zero_rates: &[f64], n_pos: usize) -> f64 {
        let mut acc = LogSumAccumulator::new();
        for g in 0..self.ln_w.len() {
            let (lp, l1p) = (self.ln_p[g], self.ln_1mp[g]);
            let mut t = self.ln_w[g] + n_pos as f64 * l1p;
            for &lam in zero_rates {
                t += log_add_exp(lp, l1p - lam);
            }
            acc.push(t);
        }
        acc.value()
    }
}

/// `Σ xᵢ ln λᵢ − λᵢ − ln xᵢ!` over `rows`.
pub(crate) fn log_poisson(data: &RegressionData, log_rates: &[f64], rows: core::ops::Range<usize>) -> f64 {
    rows.map(|i| {
        let x = data.counts()[i];
        let e = log_rates[i];
        x as f64 * e - e.exp() - ln_factorial(x)
    })
    .sum()
}

/// `ln f₁(x | β, p)`: the ZIP regression likelihood at a single p, given
/// the log rates of every row.
pub fn log_zip_density(data: &RegressionData, log_rates: &[f64], p: f64) -> f64 {
    let k = data.n_zero();
    let zeros: f64 = (0..k).map(|i| (p + (1.0 - p) * (-log_rates[i].exp()).exp()).ln()).sum();
    zeros + (data.n() - k) as f64 * (1.0 - p).ln() + log_poisson(data, log_rates, k..data.n())
}

/// Model whose marginal is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Model {
    Poisson,
    Zip,
}

/// `ln` of the model likelihood given all log rates; the ZIP likelihood is
/// already integrated over p.
pub(crate) fn log_likelihood(data: &RegressionData, rule: &PRule, model: Model, rates: &[f64]) -> f64 {
    let (n, k) = (data.n(), data.n_zero());
    match model {
        Model::Poisson => log_poisson(data, rates, 0..n),
        Model::Zip => {
            let zero_rates: Vec<f64> = rates[..k].iter().map(|e| e.exp()).collect();
            rule.log_integral(&zero_rates, n - k) + log_poisson(data, rates, k..n)
        }
    }
}

/// Center and lower-triangular scale of the integration region in β.
pub(crate) struct Reference {
    pub center: DVector<f64>,
    pub scale: DMatrix<f64>,
}

impl Reference {
    pub(crate) fn from_curvature(center: DVector<f64>, info: &DMatrix<f64>) -> Result<Self> {
        let cov = info
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("reference information matrix is singular".into()))?;
        let cov = (&cov + cov.transpose()) * 0.5;
        let scale = cholesky_lower(&cov).ok_or_else(|| Error::Numerical("reference covariance is not positive definite".into()))?;
        Ok(Self { center, scale })
    }
}

/// Poisson mode over the rows that carry the prior, with a pseudo-count
/// fallback when the plain mode does not exist (e.g. all counts zero).
fn reference(data: &RegressionData, j: RegPrior) -> Result<Reference> {
    let positive_only = j == RegPrior::J1;
    let (center, info) = match poisson_mode(data, positive_only) {
        Ok(m) => m,
        Err(Error::Numerical(_)) => poisson_mode_augmented(data, positive_only, 0.5)?,
        Err(e) => return Err(e),
    };
    Reference::from_curvature(center, &info)
}

/// Integrate `exp(log_f)` over R^dim with the configured backend.
pub(crate) fn integrate<F: Fn(&[f64]) -> f64 + Sync>(
    log_f: F,
    reference: &Reference,
    cfg: &IntegrationConfig,
    runner: &dyn ChunkRunner,
    refine: bool,
) -> Result<(LogEstimate, Backend)> {
    let dim = reference.center.len();
    let backend = cfg.resolve_backend(dim)?;
    let sd: Vec<f64> = (0..dim).map(|i| reference.scale.row(i).norm()).collect();
    let mut warnings = Vec::new();
    if backend == Backend::Quadrature && !refine {
        let est = integrate_box(&log_f, reference.center.as_slice(), &reference.scale, cfg.truncation_radius)?;
        return Ok((est, Backend::Quadrature));
    }
    // Refine the reference to the integrand's own mode and curvature.
    let fit = find_mode(&log_f, reference.center.as_slice(), &sd);
    match backend {
        Backend::Quadrature => {
            let refined = fit.and_then(|f| Reference::from_curvature(f.mode, &f.neg_hessian));
            let (center, scale) = match &refined {
                Ok(r) => (r.center.as_slice(), &r.scale),
                Err(e) => {
                    warnings.push(format!("quadrature box centered at the reference point: {e}"));
                    (reference.center.as_slice(), &reference.scale)
                }
            };
            let mut est = integrate_box(&log_f, center, scale, cfg.truncation_radius)?;
            warnings.append(&mut est.warnings);
            est.warnings = warnings;
            Ok((est, Backend::Quadrature))
        }
        _ => {
            let proposal = match fit
                .and_then(|f| Proposal::from_curvature(f.mode, &f.neg_hessian, cfg.proposal_df, cfg.proposal_scale_inflation))
            {
                Ok(p) => p,
                Err(e) => {
                    warnings.push(format!("proposal placed at the reference point: {e}"));
                    Proposal::new(reference.center.clone(), &reference.scale * cfg.proposal_scale_inflation, cfg.proposal_df)?
                }
            };
            let mut est = integrate_mc_with(runner, &log_f, &proposal, cfg)?;
            warnings.append(&mut est.warnings);
            est.warnings = warnings;
            Ok((est, Backend::ImportanceSampling))
        }
    }
}

/// Seed offset separating the M₁ sample stream from the M₀ stream.
const M1_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn marginal(
    data: &RegressionData,
    j: RegPrior,
    model: Model,
    cfg: &IntegrationConfig,
    runner: &dyn ChunkRunner,
    refine: bool,
) -> Result<(LogEstimate, Backend)> {
    if j == RegPrior::J1 && rank_positive(data) < data.q() && model == Model::Poisson {
        return Err(Error::Precondition(
            "the positive-count prior vanishes identically because the positive-count rows are rank deficient".into(),
        ));
    }
    let reference = reference(data, j)?;
    let rule = PRule::new(data.n());
    let log_f = |beta: &[f64]| -> f64 {
        let rates = log_rates(data, beta);
        let prior = log_reg_jeffreys_from_rates(data, &rates, j);
        if prior == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        prior + log_likelihood(data, &rule, model, &rates)
    };
    let cfg = match model {
        Model::Poisson => cfg.clone(),
        Model::Zip => cfg.clone().with_seed(cfg.seed ^ M1_SEED_SALT),
    };
    integrate(log_f, &reference, &cfg, runner, refine)
}

fn rank_positive(data: &RegressionData) -> usize {
    let (n, k) = (data.n(), data.n_zero());
    if n == k {
        0
    } else {
        rank(&data.design().rows(k, n - k).into_owned())
    }
}

/// `ln m₀`: Poisson likelihood integrated against the regression prior.
pub fn log_marginal_m0(data: &RegressionData, j: RegPrior, cfg: &IntegrationConfig) -> Result<LogEstimate> {
    marginal(data, j, Model::Poisson, cfg, &SerialRunner, true).map(|(e, _)| e)
}

fn refusal(report: &IntegrabilityReport, j: RegPrior) -> Option<Error> {
    match j {
        RegPrior::J1 if !report.j1_condition_ok => Some(Error::Integrability(format!(
            "positive-count rows have rank {} < {}; the marginal under j1 is not finite (use the partial prior)",
            report.rank_a_plus, report.q
        ))),
        RegPrior::J0 if !report.j0_condition_ok => {
            let rows: Vec<String> = report.cone_failures().iter().map(|r| format!("{}", r + 1)).collect();
            Some(Error::Integrability(format!(
                "zero-count rows {} are not nonnegative combinations of the positive-count rows; finiteness under j0 is unknown",
                rows.join(", ")
            )))
        }
        _ => None,
    }
}

/// Radii fractions used by the divergence diagnostic.
const DIVERGENCE_FRACTIONS: [f64; 3] = [0.25, 0.5, 1.0];

/// Truncated `ln m₁` on nested quadrature boxes of the given radii, with
/// no integrability check. A marginal that is infinite shows up as
/// estimates that keep growing with the radius. Radii are in units of the
/// Poisson reference fit, so the boxes do not depend on the integrand.
pub fn truncated_m1_profile(data: &RegressionData, j: RegPrior, cfg: &IntegrationConfig, radii: &[f64]) -> Result<Vec<f64>> {
    if data.q() > crate::numerics::MAX_QUADRATURE_DIM {
        return Err(Error::Domain(format!("truncation profile needs q <= {}", crate::numerics::MAX_QUADRATURE_DIM)));
    }
    radii
        .iter()
        .map(|&r| {
            let c = cfg.clone().with_backend(Backend::Quadrature).with_radius(r);
            marginal(data, j, Model::Zip, &c, &SerialRunner, false).map(|(e, _)| e.log_value)
        })
        .collect()
}

/// Growth pattern that indicates an infinite marginal: increasing
/// estimates with the last step larger than a factor of ten.
pub fn profile_diverges(profile: &[f64]) -> bool {
    profile.windows(2).all(|w| w[1] > w[0]) && profile.len() >= 2 && {
        let m = profile.len();
        profile[m - 1] - profile[m - 2] > 10f64.ln()
    }
}

fn m1_with(
    data: &RegressionData,
    j: RegPrior,
    cfg: &IntegrationConfig,
    force: bool,
    runner: &dyn ChunkRunner,
) -> Result<(LogEstimate, Backend)> {
    let report = check_integrability(data);
    let refused = refusal(&report, j);
    if let (Some(e), false) = (&refused, force) {
        return Err(e.clone());
    }
    let (mut est, backend) = marginal(data, j, Model::Zip, cfg, runner, true)?;
    if let Some(e) = refused {
        est.warnings.push(format!("forced run, the marginal may be infinite: {e}"));
        if data.q() <= crate::numerics::MAX_QUADRATURE_DIM {
            let radii: Vec<f64> = DIVERGENCE_FRACTIONS.iter().map(|f| f * cfg.truncation_radius).collect();
            let profile = truncated_m1_profile(data, j, cfg, &radii)?;
            if profile_diverges(&profile) {
                est.warnings.push(format!(
                    "truncated marginals grow with the integration radius ({}); the marginal appears to be infinite",
                    profile.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" -> ")
                ));
            }
        } else {
            est.warnings.push("divergence diagnostic skipped: needs q <= 3".into());
        }
    }
    Ok((est, backend))
}

/// `ln m₁`: ZIP likelihood integrated over p and against the regression
/// prior. Unless `force` is set, refuses priors for which the marginal is not
/// known to be finite; forced runs carry divergence warnings.
pub fn log_marginal_m1(data: &RegressionData, j: RegPrior, cfg: &IntegrationConfig, force: bool) -> Result<LogEstimate> {
    m1_with(data, j, cfg, force, &SerialRunner).map(|(e, _)| e)
}

/// Bayes factor `m₁/m₀` for the regression models under prior `j`.
pub fn log_bf_regression(data: &RegressionData, j: RegPrior, cfg: &IntegrationConfig) -> Result<BfResult> {
    log_bf_regression_with(data, j, cfg, false, &SerialRunner)
}

/// [`log_bf_regression`] with an explicit override and chunk executor.
pub fn log_bf_regression_with(
    data: &RegressionData,
    j: RegPrior,
    cfg: &IntegrationConfig,
    force: bool,
    runner: &dyn ChunkRunner,
) -> Result<BfResult> {
    let (m1, backend) = m1_with(data, j, cfg, force, runner)?;
    let (m0, _) = marginal(data, j, Model::Poisson, cfg, runner, true)?;
    combine(&m1, &m0, backend)
}

pub(crate) fn combine(m1: &LogEstimate, m0: &LogEstimate, backend: Backend) -> Result<BfResult> {
    let log_bf = m1.log_value - m0.log_value;
    if !log_bf.is_finite() {
        return Err(Error::Numerical(format!(
            "marginals are not finite (ln m1 = {}, ln m0 = {})",
            m1.log_value, m0.log_value
        )));
    }
    let rel_se = (m1.rel_se * m1.rel_se + m0.rel_se * m0.rel_se).sqrt();
    let mut warnings: Vec<String> = m1.warnings.iter().map(|w| format!("m1: {w}")).collect();
    warnings.extend(m0.warnings.iter().map(|w| format!("m0: {w}")));
    let method = match backend {
        Backend::Quadrature => Method::RegressionQuadrature,
        _ => Method::RegressionMc,
    };
    Ok(BfResult::new(log_bf, method, rel_se, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{log_bf_jeffreys, summarize};
    use crate::numerics::special::ln_gamma;
    use alloc::vec;

    fn intercept(counts: &[i64]) -> RegressionData {
        let n = counts.len();
        load_regression(counts, DMatrix::from_element(n, 1, 1.0), vec![0.0; n]).unwrap()
    }

    fn non_cone(x2: i64, c2: f64) -> RegressionData {
        let a = DMatrix::from_row_slice(3, 2, &[-5.0, c2, 1.0, 0.0, 0.0, 1.0]);
        load_regression(&[0, x2, 1], a, vec![0.0; 3]).unwrap()
    }

    #[test]
    fn reorders_zero_first() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let d = load_regression(&[1, 0, 2], a.clone(), vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(d.counts(), &[0, 1, 2]);
        assert_eq!(d.permutation(), &[1, 0, 2]);
        assert_eq!(d.offsets(), &[0.2, 0.1, 0.3]);
        assert_eq!(d.design()[(0, 1)], 1.0);
        assert_eq!(d.n_zero(), 1);
        let d = load_regression(&[0, 1, 2], a, vec![0.0; 3]).unwrap();
        assert_eq!(d.permutation(), &[0, 1, 2]);
    }

    #[test]
    fn load_errors() {
        let dup = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(load_regression(&[1, 2, 3], dup, vec![0.0; 3]), Err(Error::DesignRank { rank: 1, q: 2 }));
        let a = DMatrix::from_element(2, 1, 1.0);
        assert!(matches!(load_regression(&[1, -2], a.clone(), vec![0.0; 2]), Err(Error::Input(_))));
        assert!(matches!(load_regression(&[1], a.clone(), vec![0.0; 2]), Err(Error::Input(_))));
        assert!(matches!(load_regression(&[1, 2], a, vec![0.0, f64::NAN]), Err(Error::Input(_))));
    }

    #[test]
    fn integrability_examples() {
        for c2 in [-3.0, 0.0, 1.0, 2.5] {
            let r = check_integrability(&non_cone(2, c2));
            assert!(!r.j0_condition_ok);
            assert_eq!(r.cone_failures(), vec![0]);
            assert!(r.j1_condition_ok);
            assert_eq!(r.recommended_prior, RecommendedPrior::J1);
        }
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let r = check_integrability(&load_regression(&[0, 2, 1], a, vec![0.0; 3]).unwrap());
        assert!(r.j0_condition_ok);
        assert!((r.zero_rows[0].coefficients[0] - 1.0).abs() < 1e-10);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let r = check_integrability(&load_regression(&[0, 0, 4], a, vec![0.0; 3]).unwrap());
        assert_eq!(r.rank_a_plus, 1);
        assert!(!r.j1_condition_ok);
        assert_eq!(r.recommended_prior, RecommendedPrior::Partial);
    }

    #[test]
    fn intercept_m0_matches_gamma_integral() {
        let d = intercept(&[1, 2, 3]);
        let cfg = IntegrationConfig::default();
        let m0 = log_marginal_m0(&d, RegPrior::J0, &cfg).unwrap();
        let expected = 0.5 * 3.0f64.ln() + ln_gamma(6.5) - 6.5 * 3.0f64.ln() - 12.0f64.ln();
        assert!((m0.log_value - expected).abs() < 1e-10, "{} vs {expected}", m0.log_value);
        assert!((expected - -3.414018321939516930).abs() < 1e-14);
        assert_eq!(m0.rel_se, 0.0);
    }

    #[test]
    fn all_zero_intercept_m0_is_finite() {
        let d = intercept(&[0, 0, 0]);
        let m0 = log_marginal_m0(&d, RegPrior::J0, &IntegrationConfig::default()).unwrap();
        // √n ∫ e^{−nλ} λ^{−1/2} dλ = √π
        assert!((m0.log_value - 0.5 * core::f64::consts::PI.ln()).abs() < 1e-4);
        assert!(matches!(log_marginal_m0(&d, RegPrior::J1, &IntegrationConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn intercept_bf_reduces_to_closed_form() {
        let cfg = IntegrationConfig::default();
        let counts = [0i64, 1, 2];
        let closed = log_bf_jeffreys(&summarize(&counts).unwrap()).unwrap().log_bf10;
        assert!((closed - -0.52010269792452868).abs() < 1e-13);
        for j in [RegPrior::J0, RegPrior::J1] {
            let b = log_bf_regression(&intercept(&counts), j, &cfg).unwrap();
            assert_eq!(b.method, Method::RegressionQuadrature);
            assert!((b.log_bf10 - closed).abs() < 1e-8, "{j:?}: {} vs {closed}", b.log_bf10);
        }
    }

    #[test]
    fn unit_exposure_offset_is_no_offset() {
        let cfg = IntegrationConfig::default();
        let counts = [0i64, 3, 1, 0, 2];
        let a = DMatrix::from_element(5, 1, 1.0);
        let with = load_regression(&counts, a.clone(), vec![1.0f64.ln(); 5]).unwrap();
        let without = load_regression(&counts, a, vec![0.0; 5]).unwrap();
        let b1 = log_bf_regression(&with, RegPrior::J1, &cfg).unwrap().log_bf10;
        let b2 = log_bf_regression(&without, RegPrior::J1, &cfg).unwrap().log_bf10;
        assert_eq!(b1, b2);
    }

    #[test]
    fn no_zero_counts_divides_by_n_plus_one() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let d = load_regression(&[1, 3, 2, 6], a, vec![0.0; 4]).unwrap();
        let cfg = IntegrationConfig::default();
        for j in [RegPrior::J0, RegPrior::J1] {
            let m1 = log_marginal_m1(&d, j, &cfg, false).unwrap().log_value;
            let m0 = log_marginal_m0(&d, j, &cfg).unwrap().log_value;
            assert!((m1 - m0 + 5.0f64.ln()).abs() < 1e-12, "{j:?}");
        }
    }

    #[test]
    fn permutation_invariance() {
        let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0, 1.0, 0.7]);
        let counts = [2i64, 0, 3, 1, 0];
        let off = vec![0.1, 0.0, -0.2, 0.3, 0.05];
        let d1 = load_regression(&counts, a.clone(), off.clone()).unwrap();
        let order = [4usize, 2, 0, 3, 1];
        let a2 = DMatrix::from_fn(5, 2, |r, c| a[(order[r], c)]);
        let c2: Vec<i64> = order.iter().map(|&i| counts[i]).collect();
        let o2: Vec<f64> = order.iter().map(|&i| off[i]).collect();
        let d2 = load_regression(&c2, a2, o2).unwrap();
        let cfg = IntegrationConfig::default();
        for j in [RegPrior::J0, RegPrior::J1] {
            let x = log_marginal_m1(&d1, j, &cfg, false).unwrap().log_value;
            let y = log_marginal_m1(&d2, j, &cfg, false).unwrap().log_value;
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            let x = log_marginal_m0(&d1, j, &cfg).unwrap().log_value;
            let y = log_marginal_m0(&d2, j, &cfg).unwrap().log_value;
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn offset_shift_moves_intercept() {
        let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0, 1.0, 0.7]);
        let counts = [2i64, 0, 3, 1, 0];
        let off = vec![0.1, 0.0, -0.2, 0.3, 0.05];
        let shifted: Vec<f64> = off.iter().map(|o| o + 1.7).collect();
        let d1 = load_regression(&counts, a.clone(), off).unwrap();
        let d2 = load_regression(&counts, a, shifted).unwrap();
        let cfg = IntegrationConfig::default();
        for j in [RegPrior::J0, RegPrior::J1] {
            let x = log_marginal_m1(&d1, j, &cfg, false).unwrap().log_value;
            let y = log_marginal_m1(&d2, j, &cfg, false).unwrap().log_value;
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            let x = log_marginal_m0(&d1, j, &cfg).unwrap().log_value;
            let y = log_marginal_m0(&d2, j, &cfg).unwrap().log_value;
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn non_cone_design_is_refused_then_diverges() {
        let d = non_cone(2, 1.0);
        let cfg = IntegrationConfig::default();
        assert!(matches!(log_marginal_m1(&d, RegPrior::J0, &cfg, false), Err(Error::Integrability(_))));
        let profile = truncated_m1_profile(&d, RegPrior::J0, &cfg, &[5.0, 10.0, 20.0]).unwrap();
        assert!(profile[0] < profile[1] && profile[1] < profile[2], "{profile:?}");
        assert!(profile[2] - profile[1] > 10f64.ln(), "{profile:?}");
        let forced = log_marginal_m1(&d, RegPrior::J0, &cfg, true).unwrap();
        assert!(forced.warnings.iter().any(|w| w.contains("appears to be infinite")), "{:?}", forced.warnings);
        // The positive-count prior is fine on the same data.
        assert!(log_bf_regression(&d, RegPrior::J1, &cfg).unwrap().log_bf10.is_finite());
    }

    #[test]
    fn backends_agree_on_intercept_model() {
        let d = intercept(&[1, 2, 3]);
        let q = log_marginal_m0(&d, RegPrior::J0, &IntegrationConfig::default()).unwrap();
        let cfg = IntegrationConfig::default().with_backend(Backend::ImportanceSampling).with_seed(5);
        let m = log_marginal_m0(&d, RegPrior::J0, &cfg).unwrap();
        assert!((q.log_value - m.log_value).abs() < 3.0 * m.rel_se, "{} vs {} ± {}", q.log_value, m.log_value, m.rel_se);
    }

    mod props {
        extern crate std;
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn sandwich_bounds(
                beta in proptest::array::uniform2(-3.0f64..3.0),
                p in 0.001f64..0.999,
                counts in proptest::collection::vec(0i64..4, 6),
            ) {
                let a = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, -1.0, 1.0, 2.0, 1.0, 0.5, 1.0, -0.3]);
                let d = load_regression(&counts, a, vec![0.0; 6]).unwrap();
                let rates = log_rates(&d, &beta);
                let k = d.n_zero();
                let pois = log_poisson(&d, &rates, k..d.n());
                let f1 = log_zip_density(&d, &rates, p);
                let lower = k as f64 * p.ln() + (d.n() - k) as f64 * (1.0 - p).ln() + pois;
                prop_assert!(lower <= f1 + 1e-12);
                prop_assert!(f1 <= pois + 1e-12);
            }

            #[test]
            fn p_rule_is_exact(
                rates in proptest::collection::vec(0.01f64..5.0, 0..6),
                n_pos in 0usize..6,
            ) {
                let rule = PRule::new(rates.len() + n_pos);
                let got = rule.log_integral(&rates, n_pos);
                // Reference: 200-node rule, far above the polynomial degree.
                let (x, w) = gauss_legendre(200);
                let mut s = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    let p = 0.5 * (1.0 + xi);
                    let mut f = (1.0 - p).powi(n_pos as i32);
                    for r in &rates {
                        f *= p + (1.0 - p) * (-r).exp();
                    }
                    s += 0.5 * wi * f;
                }
                prop_assert!((got - s.ln()).abs() < 1e-12);
            }
        }
    }
}
