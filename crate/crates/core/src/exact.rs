//! Bayes factors for i.i.d. counts: Poisson against zero-inflated Poisson.
//!
//! With a uniform prior on the zero-inflation probability and a shared
//! prior on λ, expanding `∏(p + (1−p)e^{−λ})` over the zero counts and
//! integrating p term by term leaves one λ-integral per term. For the
//! `λ^{−1/2}` and Gamma priors those integrals are Gamma functions, giving a
//! closed form; for the `k(λ)/√λ` prior they are done by quadrature.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::special::{ln_factorial, ln_gamma, LogSumAccumulator};
use crate::numerics::{integrate_1d, IntegrationConfig};
use crate::priors::ln_k_lambda;

/// Sufficient statistics of a count sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountSummary {
    pub n: u64,
    /// Number of zero counts.
    pub k: u64,
    /// Total count.
    pub s: u64,
    /// `Σ ln xᵢ!`; `None` when the summary was built without the raw counts.
    pub log_factorial_product: Option<f64>,
}

impl CountSummary {
    /// Summary from `(n, k, s)` alone. Checks that some sample has these statistics.
    pub fn new(n: u64, k: u64, s: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("sample is empty".into()));
        }
        if k > n {
            return Err(Error::Input(format!("k = {k} zero counts exceeds n = {n}")));
        }
        if (s == 0) != (k == n) {
            return Err(Error::Input(format!("inconsistent summary: s = {s} with k = {k} of n = {n} zeros")));
        }
        if s < n - k {
            return Err(Error::Input(format!("{} positive counts cannot sum to s = {s}", n - k)));
        }
        Ok(Self { n, k, s, log_factorial_product: None })
    }
}

/// Compute `(n, k, s, Σ ln xᵢ!)` from raw counts.
pub fn summarize(counts: &[i64]) -> Result<CountSummary> {
    if counts.is_empty() {
        return Err(Error::Input("no counts given".into()));
    }
    let (mut k, mut s, mut lf) = (0u64, 0u64, 0.0);
    for (i, &x) in counts.iter().enumerate() {
        if x < 0 {
            return Err(Error::Input(format!("count {} is negative ({x})", i + 1)));
        }
        let x = x as u64;
        if x == 0 {
            k += 1;
        }
        s = s
            .checked_add(x)
            .ok_or_else(|| Error::Input("total count overflows".into()))?;
        lf += ln_factorial(x);
    }
    Ok(CountSummary { n: counts.len() as u64, k, s, log_factorial_product: Some(lf) })
}

/// How a Bayes factor was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    ClosedForm,
    QuadratureL1,
    GammaClosedForm,
    AllZeros,
    RegressionQuadrature,
    RegressionMc,
    RankDeficient,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed_form",
            Method::QuadratureL1 => "quadrature_l1",
            Method::GammaClosedForm => "gamma_closed_form",
            Method::AllZeros => "all_zeros",
            Method::RegressionQuadrature => "regression_quadrature",
            Method::RegressionMc => "regression_mc",
            Method::RankDeficient => "rank_deficient",
        })
    }
}

/// Bayes factor of the zero-inflated model M₁ against the Poisson model M₀.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BfResult {
    pub log_bf10: f64,
    pub bf10: f64,
    pub post_prob_m1: f64,
    /// `Pr(M₁)/Pr(M₀)`.
    pub prior_odds: f64,
    pub method: Method,
    /// Relative standard error of `bf10`; zero for deterministic methods.
    pub rel_se: f64,
    pub warnings: Vec<String>,
}

impl BfResult {
    pub fn new(log_bf10: f64, method: Method, rel_se: f64, warnings: Vec<String>) -> Self {
        Self {
            log_bf10,
            bf10: log_bf10.exp(),
            post_prob_m1: posterior_prob(log_bf10, 1.0),
            prior_odds: 1.0,
            method,
            rel_se,
            warnings,
        }
    }

    /// Recompute the posterior probability for other prior odds.
    pub fn with_prior_odds(mut self, prior_odds: f64) -> Result<Self> {
        if !(prior_odds > 0.0 && prior_odds.is_finite()) {
            return Err(Error::Domain(format!("prior odds must be positive and finite, got {prior_odds}")));
        }
        self.prior_odds = prior_odds;
        self.post_prob_m1 = posterior_prob(self.log_bf10, prior_odds);
        Ok(self)
    }

    /// `Pr(M₀ | x)`.
    pub fn post_prob_m0(&self) -> f64 {
        posterior_prob(-self.log_bf10, 1.0 / self.prior_odds)
    }
}

/// `Pr(M₁ | x) = 1 − [1 + B₁₀ ρ]⁻¹` from `ln B₁₀` and prior odds `ρ`,
/// evaluated as a logistic function so that extreme factors do not overflow.
/// Returns NaN when `ρ ≤ 0`.
pub fn posterior_prob(log_bf10: f64, prior_odds: f64) -> f64 {
    if !(prior_odds > 0.0) {
        return f64::NAN;
    }
    let x = log_bf10 + prior_odds.ln();
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln[k!(n−j)! / ((n+1)!(k−j)!)]`, the weight of term j in the expansion.
fn log_term_weight(n: u64, k: u64, j: u64) -> f64 {
    ln_factorial(k) - ln_gamma(n as f64 + 2.0) + ln_factorial(n - j) - ln_factorial(k - j)
}

fn log_bf_closed(summary: &CountSummary, a: f64, b: f64) -> f64 {
    let (n, k, s) = (summary.n, summary.k, summary.s);
    let nb = n as f64 + b;
    let e = s as f64 + a;
    let mut acc = LogSumAccumulator::new();
    for j in 0..=k {
        acc.push(log_term_weight(n, k, j) - e * (-(j as f64) / nb).ln_1p());
    }
    acc.value()
}

/// Closed-form Bayes factor under the `λ^{−1/2}` prior:
/// `B₁₀ = k!/(n+1)! Σ_{j=0}^{k} (n−j)!/(k−j)! (1 − j/n)^{−(s+½)}`.
///
/// Requires `s > 0`; with all counts zero the zero-inflated marginal is
/// infinite and [`log_bf_all_zeros`] applies instead.
pub fn log_bf_jeffreys(summary: &CountSummary) -> Result<BfResult> {
    if summary.s == 0 {
        return Err(Error::AllZeros { n: summary.n as usize });
    }
    Ok(BfResult::new(log_bf_closed(summary, 0.5, 0.0), Method::ClosedForm, 0.0, Vec::new()))
}

/// Bayes factor under a `Gamma(a, b)` prior on λ:
/// `B₁₀ = k!/(n+1)! Σ_{j=0}^{k} (n−j)!/(k−j)! (1 − j/(n+b))^{−(s+a)}`.
///
/// `a = ½, b = 0` reproduces [`log_bf_jeffreys`]. With `s = 0` the prior must
/// be proper (`b > 0`).
pub fn log_bf_gamma(summary: &CountSummary, a: f64, b: f64) -> Result<BfResult> {
    if !(a > 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("gamma prior needs a > 0 and b >= 0, got a={a}, b={b}")));
    }
    if summary.s == 0 && b == 0.0 {
        return Err(Error::AllZeros { n: summary.n as usize });
    }
    Ok(BfResult::new(log_bf_closed(summary, a, b), Method::GammaClosedForm, 0.0, Vec::new()))
}

/// Bayes factor for an all-zero sample of size n under a proper
/// `Gamma(a, b)` prior: `B₁₀(0) = (n+b)^a/(n+1) Σ_{j=0}^{n} (j+b)^{−a}`.
///
/// For `a = b = 1` this is the harmonic number `H_{n+1} ≈ ln(n+1)`.
pub fn log_bf_all_zeros(n: u64, a: f64, b: f64) -> Result<BfResult> {
    if n == 0 {
        return Err(Error::Input("sample is empty".into()));
    }
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("all-zero data need a proper prior: a > 0 and b > 0, got a={a}, b={b}")));
    }
    let mut acc = LogSumAccumulator::new();
    for j in 0..=n {
        acc.push(-a * (j as f64 + b).ln());
    }
    let log_bf = a * (n as f64 + b).ln() - (n as f64 + 1.0).ln() + acc.value();
    Ok(BfResult::new(log_bf, Method::AllZeros, 0.0, Vec::new()))
}

/// Bayes factor under the `k(λ)/√λ` prior, one quadrature per term.
///
/// The product of `xᵢ!` cancels between the marginals, so only the summary
/// is needed. Lies within a factor √2 of [`log_bf_jeffreys`].
pub fn log_bf_l1(summary: &CountSummary, cfg: &IntegrationConfig) -> Result<BfResult> {
    log_bf_l1_with(summary, cfg, |l| ln_k_lambda(l).unwrap_or(f64::NAN))
}

/// [`log_bf_l1`] with `ln k(λ)` replaced by `ln_k`. Passing `|_| 0.0`
/// recovers the `λ^{−1/2}` prior, which serves as a check on the quadrature.
pub fn log_bf_l1_with<K: Fn(f64) -> f64>(summary: &CountSummary, cfg: &IntegrationConfig, ln_k: K) -> Result<BfResult> {
    let (n, k, s) = (summary.n, summary.k, summary.s);
    if s == 0 {
        return Err(Error::AllZeros { n: n as usize });
    }
    cfg.validate()?;
    let z = s as f64 + 0.5;
    // ln ∫ e^{−cλ} λ^{s−½} k(λ) dλ, substituting λ = μ/c so the peak sits near μ = s.
    let log_i = |c: f64| -> Result<f64> {
        let est = integrate_1d(|mu: f64| -mu + (z - 1.0) * mu.ln() + ln_k(mu / c), cfg)?;
        Ok(est.log_value - z * c.ln())
    };
    let log_m0 = log_i(n as f64)?;
    let mut acc = LogSumAccumulator::new();
    for j in 0..=k {
        acc.push(log_term_weight(n, k, j) + log_i((n - j) as f64)?);
    }
    let log_bf = acc.value() - log_m0;
    if !log_bf.is_finite() {
        return Err(Error::Numerical(format!("Bayes factor evaluated to {log_bf}")));
    }
    Ok(BfResult::new(log_bf, Method::QuadratureL1, 0.0, Vec::new()))
}
