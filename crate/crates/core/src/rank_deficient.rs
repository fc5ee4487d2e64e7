//! Bayes factors when the positive-count rows do not identify β.
//!
//! If the positive-count rows span only `t < q` dimensions, neither
//! regression Jeffreys prior gives a finite ZIP marginal. β is then
//! reparameterized as `(ln λ_j, ζ)`: t rates of positive-count rows receive
//! a Jeffreys-type prior, and `q − t` directions spanned by chosen
//! zero-count rows receive a proper prior (`ξ = e^ζ ~ Exp(1)`). Both models
//! use this prior. Different choices of those zero-count rows give different
//! Bayes factors, which can be enumerated and averaged.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exact::{BfResult, Method};
use crate::numerics::glm::fit_poisson;
use crate::numerics::mode::find_mode;
use crate::numerics::montecarlo::{ChunkRunner, SerialRunner};
use crate::numerics::special::LogSumAccumulator;
use crate::numerics::{Backend, IntegrationConfig, LogEstimate};
use crate::priors::{build_partial_prior, in_span_rows, log_rates, PartialPriorSpec};
use crate::regression::{combine, integrate, log_likelihood, Model, PRule, Reference, RegressionData};

/// Enumeration stops after this many selections.
pub const MAX_SELECTIONS: usize = 64;

/// Bayes factor for one choice of the zero-count rows carrying the proper prior.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    /// Zero-count rows of the selection, as zero-based input rows.
    pub l_rows: Vec<usize>,
    pub log_bf10: f64,
    pub rel_se: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankDeficientResult {
    /// The first entry is the default (lexicographically first) selection.
    pub selections: Vec<Selection>,
    pub arithmetic_mean_bf: f64,
    pub geometric_mean_bf: f64,
    /// Rank of the positive-count rows.
    pub t: usize,
    /// Zero-count rows lying in the span of the positive-count rows.
    pub r: usize,
    pub deficiency: usize,
    /// Positive-count rows carrying the Jeffreys-type factor, as zero-based input rows.
    pub j_rows: Vec<usize>,
    pub backend: Backend,
    pub warnings: Vec<String>,
}

impl RankDeficientResult {
    /// Bayes factor of the default selection.
    pub fn default_bf(&self) -> BfResult {
        let s = &self.selections[0];
        let mut warnings = s.warnings.clone();
        warnings.extend(self.warnings.iter().cloned());
        BfResult::new(s.log_bf10, Method::RankDeficient, s.rel_se, warnings)
    }
}

/// Averages of a list of Bayes factors given on the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BfAverages {
    pub arithmetic: f64,
    pub geometric: f64,
    /// Number of finite entries that entered the averages.
    pub used: usize,
    pub warnings: Vec<String>,
}

/// Arithmetic mean of the Bayes factors and their geometric mean
/// (the exponential of the mean log). Non-finite entries are dropped.
pub fn average_bfs(log_bfs: &[f64]) -> Result<BfAverages> {
    let finite: Vec<f64> = log_bfs.iter().cloned().filter(|v| v.is_finite()).collect();
    let mut warnings = Vec::new();
    if finite.len() < log_bfs.len() {
        warnings.push(format!("{} non-finite Bayes factors excluded from the averages", log_bfs.len() - finite.len()));
    }
    if finite.is_empty() {
        return Err(Error::Numerical("no finite Bayes factors to average".into()));
    }
    let m = finite.len() as f64;
    let mut acc = LogSumAccumulator::new();
    finite.iter().for_each(|&v| acc.push(v));
    let arithmetic = (acc.value() - m.ln()).exp();
    let geometric = (finite.iter().sum::<f64>() / m).exp();
    Ok(BfAverages { arithmetic, geometric, used: finite.len(), warnings })
}

/// Maps the integration variable `u = (ln λ_j − a₀_j, ζ)` back to β.
struct PartialCoordinates<'a> {
    data: &'a RegressionData,
    spec: &'a PartialPriorSpec,
    inverse: DMatrix<f64>,
}

impl<'a> PartialCoordinates<'a> {
    fn new(data: &'a RegressionData, spec: &'a PartialPriorSpec) -> Result<Self> {
        let inverse = spec
            .coordinate_map(data)
            .try_inverse()
            .ok_or_else(|| Error::Construction("selected rows do not form a basis".into()))?;
        Ok(Self { data, spec, inverse })
    }

    /// Log prior density in u: `½ ln|Cᵀ Diag(λ₊) C| + Σ (ζ − e^ζ)`.
    fn log_integrand(&self, u: &[f64], rule: &PRule, model: Model) -> f64 {
        let q = u.len();
        let mut beta = vec![0.0; q];
        for (r, b) in beta.iter_mut().enumerate() {
            *b = (0..q).map(|c| self.inverse[(r, c)] * u[c]).sum();
        }
        let rates = log_rates(self.data, &beta);
        let k = self.data.n_zero();
        let prior = self.spec.log_jeffreys_factor(&rates[k..])
            + u[self.spec.t..].iter().map(|z| z - z.exp()).sum::<f64>();
        prior + log_likelihood(self.data, rule, model, &rates)
    }

    /// Starting point and curvature: Poisson fit of the identified
    /// directions, the prior mode `ζ = 0` for the rest, refined on the
    /// integrand itself.
    fn reference(&self, rule: &PRule, model: Model) -> Result<Reference> {
        let (n, q, k, t) = (self.data.n(), self.data.q(), self.data.n_zero(), self.spec.t);
        let mut start = DVector::zeros(q);
        let mut info = DMatrix::identity(q, q);
        if t > 0 {
            let y: Vec<f64> = self.data.counts()[k..].iter().map(|&c| c as f64).collect();
            let (eta, inf) = fit_poisson(&self.spec.c, &y, &self.data.offsets()[k..n])?;
            start.rows_mut(0, t).copy_from(&eta);
            info.view_mut((0, 0), (t, t)).copy_from(&inf);
        }
        let start_ref = Reference::from_curvature(start, &info)?;
        let sd: Vec<f64> = (0..q).map(|i| start_ref.scale.row(i).norm()).collect();
        match find_mode(|u: &[f64]| self.log_integrand(u, rule, model), start_ref.center.as_slice(), &sd) {
            Ok(fit) => Reference::from_curvature(fit.mode, &fit.neg_hessian).or(Ok(start_ref)),
            Err(_) => Ok(start_ref),
        }
    }
}

fn partial_marginal(
    data: &RegressionData,
    spec: &PartialPriorSpec,
    model: Model,
    cfg: &IntegrationConfig,
    runner: &dyn ChunkRunner,
) -> Result<(LogEstimate, Backend)> {
    let coords = PartialCoordinates::new(data, spec)?;
    let rule = PRule::new(data.n());
    let reference = coords.reference(&rule, model)?;
    let cfg = match model {
        Model::Poisson => cfg.clone(),
        Model::Zip => cfg.clone().with_seed(cfg.seed ^ 0x9E37_79B9_7F4A_7C15),
    };
    integrate(|u: &[f64]| coords.log_integrand(u, &rule, model), &reference, &cfg, runner, true)
}

/// `ln m₀` and `ln m₁` under the partially proper prior of `spec`.
pub fn log_partial_marginals(
    data: &RegressionData,
    spec: &PartialPriorSpec,
    cfg: &IntegrationConfig,
) -> Result<(LogEstimate, LogEstimate)> {
    let (m0, _) = partial_marginal(data, spec, Model::Poisson, cfg, &SerialRunner)?;
    let (m1, _) = partial_marginal(data, spec, Model::Zip, cfg, &SerialRunner)?;
    Ok((m0, m1))
}

fn selection_bf(
    data: &RegressionData,
    spec: &PartialPriorSpec,
    cfg: &IntegrationConfig,
    runner: &dyn ChunkRunner,
) -> Result<(Selection, Backend)> {
    let (m1, backend) = partial_marginal(data, spec, Model::Zip, cfg, runner)?;
    let (m0, _) = partial_marginal(data, spec, Model::Poisson, cfg, runner)?;
    let bf = combine(&m1, &m0, backend)?;
    let l_rows = spec.l_set.iter().map(|&l| data.permutation()[l]).collect();
    Ok((Selection { l_rows, log_bf10: bf.log_bf10, rel_se: bf.rel_se, warnings: bf.warnings }, backend))
}

/// Bayes factors under the partially proper prior. Computes the default
/// selection, or with `enumerate_all` every admissible zero-count row
/// (deficiency one only), and reports arithmetic and geometric means.
pub fn log_bf_rank_deficient(data: &RegressionData, cfg: &IntegrationConfig, enumerate_all: bool) -> Result<RankDeficientResult> {
    log_bf_rank_deficient_with(data, cfg, enumerate_all, &SerialRunner)
}

/// [`log_bf_rank_deficient`] with an explicit chunk executor.
pub fn log_bf_rank_deficient_with(
    data: &RegressionData,
    cfg: &IntegrationConfig,
    enumerate_all: bool,
    runner: &dyn ChunkRunner,
) -> Result<RankDeficientResult> {
    let base = build_partial_prior(data)?;
    let deficiency = base.deficiency();
    let mut warnings = Vec::new();
    let specs: Vec<PartialPriorSpec> = if enumerate_all {
        if deficiency != 1 {
            return Err(Error::Precondition(format!(
                "enumerating selections is defined for rank deficiency 1, this design has deficiency {deficiency}"
            )));
        }
        let in_span = in_span_rows(data)?;
        let candidates: Vec<usize> = (0..data.n_zero()).filter(|i| !in_span.contains(i)).collect();
        if candidates.len() > MAX_SELECTIONS {
            warnings.push(format!(
                "{} admissible selections, only the first {MAX_SELECTIONS} were computed",
                candidates.len()
            ));
        }
        candidates
            .into_iter()
            .take(MAX_SELECTIONS)
            .map(|l| PartialPriorSpec::from_selection(data, base.j_set.clone(), vec![l]))
            .collect::<Result<_>>()?
    } else {
        vec![base.clone()]
    };

    let mut selections = Vec::with_capacity(specs.len());
    let mut backend = Backend::Quadrature;
    for spec in &specs {
        let (sel, b) = selection_bf(data, spec, cfg, runner)?;
        backend = b;
        selections.push(sel);
    }
    let logs: Vec<f64> = selections.iter().map(|s| s.log_bf10).collect();
    let avg = average_bfs(&logs)?;
    warnings.extend(avg.warnings);
    Ok(RankDeficientResult {
        selections,
        arithmetic_mean_bf: avg.arithmetic,
        geometric_mean_bf: avg.geometric,
        t: base.t,
        r: base.r,
        deficiency,
        j_rows: base.j_set.iter().map(|&j| data.permutation()[j]).collect(),
        backend,
        warnings,
    })
}
