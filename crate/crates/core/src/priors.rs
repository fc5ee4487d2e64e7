//! Prior densities for λ and for regression coefficients β.
//!
//! All densities are returned as natural logarithms. Improper priors are
//! unnormalized; their constants cancel in Bayes factors because both models
//! share the same prior on the common parameter.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::linalg::{rank, rank_and_basis, weighted_gram_log_det, RANK_TOL};
use crate::numerics::special::ln_gamma;
use crate::regression::{RegPrior, RegressionData};

/// Prior family for λ (i.i.d. case) or β (regression case).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PriorSpec {
    /// `π(λ) = k(λ)^l / √λ` with `l ∈ {0, 1}`.
    Jeffreys { l: u8 },
    /// `Gamma(a, b)` with rate `b`; `b = 0` is the improper limit.
    Gamma { a: f64, b: f64 },
    RegJeffreys(RegPrior),
    PartialJeffreys,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::Jeffreys { l } if l > 1 => Err(Error::Domain(format!("Jeffreys variant must be 0 or 1, got {l}"))),
            PriorSpec::Gamma { a, b } if !(a > 0.0 && a.is_finite()) || !(b >= 0.0 && b.is_finite()) => {
                Err(Error::Domain(format!("gamma prior needs a > 0 and b >= 0, got a={a}, b={b}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, PriorSpec::RegJeffreys(_) | PriorSpec::PartialJeffreys)
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Jeffreys { l } => write!(f, "jeffreys{l}"),
            PriorSpec::Gamma { a, b } => write!(f, "gamma:{a},{b}"),
            PriorSpec::RegJeffreys(RegPrior::J0) => f.write_str("j0"),
            PriorSpec::RegJeffreys(RegPrior::J1) => f.write_str("j1"),
            PriorSpec::PartialJeffreys => f.write_str("partial"),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    /// Parses `jeffreys0`, `jeffreys1`, `gamma:a,b`, `j0`, `j1` or `partial`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = match s {
            "jeffreys0" => PriorSpec::Jeffreys { l: 0 },
            "jeffreys1" => PriorSpec::Jeffreys { l: 1 },
            "j0" => PriorSpec::RegJeffreys(RegPrior::J0),
            "j1" => PriorSpec::RegJeffreys(RegPrior::J1),
            "partial" => PriorSpec::PartialJeffreys,
            _ => {
                let rest = s
                    .strip_prefix("gamma:")
                    .ok_or_else(|| Error::Input(format!("unknown prior '{s}'")))?;
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::Input(format!("gamma prior must be written gamma:a,b, got '{s}'")))?;
                let parse = |v: &str| -> Result<f64> {
                    v.trim().parse::<f64>().map_err(|_| Error::Input(format!("invalid number '{v}' in prior '{s}'")))
                };
                PriorSpec::Gamma { a: parse(a)?, b: parse(b)? }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("λ must be positive and finite, got {lambda}")))
    }
}

/// `N(λ) = 1 − (λ+1)e^{−λ}`, by its alternating series for small λ.
fn n_lambda(lambda: f64) -> f64 {
    if lambda < 0.5 {
        // Σ_{m≥2} (−1)^m (m−1) λ^m / m!
        let mut term = lambda; // λ^m / m! at m = 1
        let mut sum = 0.0;
        for m in 2..40 {
            term *= lambda / m as f64;
            let t = (m - 1) as f64 * term;
            sum += if m % 2 == 0 { t } else { -t };
            if t < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - (lambda + 1.0) * (-lambda).exp()
    }
}

/// Series of `k(λ)²` about zero.
fn k_squared_series(lambda: f64) -> f64 {
    0.5 + lambda / 6.0 - lambda * lambda * lambda / 180.0
}

/// `1 − k(λ)`, accurate for large λ where `k(λ)` rounds to one.
pub fn k_deficit(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda <= 1.0 {
        return Ok(1.0 - k_lambda(lambda)?);
    }
    let e = (-lambda).exp();
    let d = -(-lambda).exp_m1();
    let n = n_lambda(lambda);
    Ok(((lambda - 1.0) * e + e * e) / (d * (d + n.sqrt())))
}

/// `k(λ) = √(1 − (λ+1)e^{−λ}) / (1 − e^{−λ})`, the zero-truncated Poisson
/// information factor. Increases from 1/√2 at 0⁺ to 1 at ∞.
pub fn k_lambda(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda < 1e-4 {
        return Ok(k_squared_series(lambda).sqrt());
    }
    let d = -(-lambda).exp_m1();
    Ok(n_lambda(lambda).sqrt() / d)
}

/// `ln k(λ)`.
pub fn ln_k_lambda(lambda: f64) -> Result<f64> {
    if lambda > 1.0 {
        Ok((-k_deficit(lambda)?).ln_1p())
    } else {
        Ok(k_lambda(lambda)?.ln())
    }
}

/// `l · ln k(λ) − ½ ln λ`.
pub fn log_prior_lambda(lambda: f64, l: u8) -> Result<f64> {
    check_lambda(lambda)?;
    match l {
        0 => Ok(-0.5 * lambda.ln()),
        1 => Ok(ln_k_lambda(lambda)? - 0.5 * lambda.ln()),
        _ => Err(Error::Domain(format!("Jeffreys variant must be 0 or 1, got {l}"))),
    }
}

/// Log density of `Gamma(a, b)` (rate `b`) at λ.
pub fn log_gamma_prior(lambda: f64, a: f64, b: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("gamma density needs a > 0 and b > 0, got a={a}, b={b}")));
    }
    Ok(a * b.ln() - b * lambda + (a - 1.0) * lambda.ln() - ln_gamma(a))
}

/// `ln λᵢ = a₀ᵢ + aᵢᵀβ` for every row.
pub(crate) fn log_rates(data: &RegressionData, beta: &[f64]) -> Vec<f64> {
    let a = data.design();
    (0..data.n())
        .map(|i| {
            let mut e = data.offsets()[i];
            for (c, b) in beta.iter().enumerate() {
                e += a[(i, c)] * b;
            }
            e
        })
        .collect()
}

/// `½ ln |Σ λᵢ aᵢaᵢᵀ|`, summing over every row for `J0` and over the
/// positive-count rows for `J1`. Returns −∞ where the matrix is singular.
pub fn log_reg_jeffreys(beta: &[f64], data: &RegressionData, j: RegPrior) -> Result<f64> {
    if beta.len() != data.q() {
        return Err(Error::Domain(format!("β has length {}, design has {} columns", beta.len(), data.q())));
    }
    let lw = log_rates(data, beta);
    Ok(log_reg_jeffreys_from_rates(data, &lw, j))
}

pub(crate) fn log_reg_jeffreys_from_rates(data: &RegressionData, log_rates: &[f64], j: RegPrior) -> f64 {
    let start = match j {
        RegPrior::J0 => 0,
        RegPrior::J1 => data.n_zero(),
    };
    let rows = data.design().rows(start, data.n() - start);
    0.5 * weighted_gram_log_det(&rows.into_owned(), &log_rates[start..])
}

/// Construction of the partially proper prior used when the positive-count
/// rows span only `t < q` dimensions.
///
/// Row indices refer to the zero-first ordering of [`RegressionData`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartialPriorSpec {
    /// Rank of the positive-count rows.
    pub t: usize,
    /// Positive-count rows carrying the Jeffreys-type factor.
    pub j_set: Vec<usize>,
    /// Zero-count rows carrying the proper factor.
    pub l_set: Vec<usize>,
    /// Zero-count rows lying in the span of the positive-count rows.
    pub in_span: Vec<usize>,
    /// Number of entries in `in_span`.
    pub r: usize,
    /// `(n−k)×t` coefficients with `a_m = Σᵢ C[m,i] a_{jᵢ}` for positive rows m.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub c: DMatrix<f64>,
    /// Orthonormal basis of `span{a_l}`, one column per vector (`q×(q−t)`).
    #[cfg_attr(feature = "serde", serde(skip))]
    pub b: DMatrix<f64>,
    /// `d[w,h] = b_hᵀ a_{l_w}`.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub d: DMatrix<f64>,
}

fn row_vec(data: &RegressionData, i: usize) -> DVector<f64> {
    data.design().row(i).transpose()
}

fn rows_matrix(data: &RegressionData, idx: &[usize]) -> DMatrix<f64> {
    let q = data.q();
    DMatrix::from_fn(idx.len(), q, |r, c| data.design()[(idx[r], c)])
}

/// Greedily pick, in index order, rows that raise the rank of `base`.
fn greedy_extend(data: &RegressionData, base: &[usize], candidates: impl Iterator<Item = usize>, want: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut all: Vec<usize> = base.to_vec();
    let mut current = if all.is_empty() { 0 } else { rank(&rows_matrix(data, &all)) };
    for i in candidates {
        if chosen.len() == want {
            break;
        }
        all.push(i);
        let r = rank(&rows_matrix(data, &all));
        if r > current {
            current = r;
            chosen.push(i);
        } else {
            all.pop();
        }
    }
    chosen
}

/// Relative residual of projecting `v` onto the column space of `basis`.
fn span_residual(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm() / v.norm().max(f64::MIN_POSITIVE)
}

/// Solve `A_+ = C A_j` for C by least squares and check the reconstruction.
fn solve_c(data: &RegressionData, j_set: &[usize]) -> Result<DMatrix<f64>> {
    let k = data.n_zero();
    let a_plus = data.design().rows(k, data.n() - k).into_owned();
    let a_j = rows_matrix(data, j_set);
    if j_set.is_empty() {
        return Ok(DMatrix::zeros(data.n() - k, 0));
    }
    // C A_j = A_+  ⇔  A_jᵀ Cᵀ = A_+ᵀ
    let svd = a_j.transpose().svd(true, true);
    let ct = svd
        .solve(&a_plus.transpose(), 1e-12)
        .map_err(|e| Error::Construction(format!("solving for C failed: {e}")))?;
    let c = ct.transpose();
    let resid = (&c * &a_j - &a_plus).amax();
    let scale = a_plus.amax().max(1.0);
    if resid > 1e-10 * scale * 10.0 {
        return Err(Error::Construction(format!("positive-count rows are not reproduced by the chosen rows (residual {resid:e})")));
    }
    Ok(c)
}

impl PartialPriorSpec {
    /// Build the construction for given `j_set` and `l_set`, validating both.
    pub fn from_selection(data: &RegressionData, j_set: Vec<usize>, l_set: Vec<usize>) -> Result<Self> {
        let (n, q, k) = (data.n(), data.q(), data.n_zero());
        let a_plus = data.design().rows(k, n - k).into_owned();
        let (t, v_plus) = rank_and_basis(&a_plus.transpose(), RANK_TOL);
        if t == q {
            return Err(Error::Precondition("positive-count rows have full rank; use the standard priors".into()));
        }
        if j_set.len() != t || j_set.iter().any(|&j| j < k || j >= n) {
            return Err(Error::Construction(format!("j_set must name {t} positive-count rows")));
        }
        if rank(&rows_matrix(data, &j_set)) != t {
            return Err(Error::Construction("rows in j_set are linearly dependent".into()));
        }
        let in_span: Vec<usize> = (0..k)
            .filter(|&i| {
                let v = row_vec(data, i);
                v.norm() == 0.0 || span_residual(&v, &v_plus) <= RANK_TOL
            })
            .collect();
        if l_set.len() != q - t || l_set.iter().any(|&l| l >= k || in_span.contains(&l)) {
            return Err(Error::Construction(format!("l_set must name {} zero-count rows outside the positive-row span", q - t)));
        }
        let mut all = j_set.clone();
        all.extend_from_slice(&l_set);
        if rank(&rows_matrix(data, &all)) != q {
            return Err(Error::Construction("j_set and l_set rows are not linearly independent".into()));
        }
        let c = solve_c(data, &j_set)?;
        let a_l = rows_matrix(data, &l_set);
        let (_, b) = rank_and_basis(&a_l.transpose(), RANK_TOL);
        if b.ncols() != q - t {
            return Err(Error::Construction("l_set rows are linearly dependent".into()));
        }
        let d = &a_l * &b;
        let r = in_span.len();
        Ok(Self { t, j_set, l_set, in_span, r, c, b, d })
    }

    pub fn deficiency(&self) -> usize {
        self.l_set.len()
    }

    /// Reconstruct `ln λ_m` for every positive-count row from `ln λ_j`.
    pub(crate) fn positive_log_rates(&self, data: &RegressionData, ln_lambda_j: &[f64]) -> Vec<f64> {
        let k = data.n_zero();
        let off = data.offsets();
        let eta: Vec<f64> = self.j_set.iter().zip(ln_lambda_j).map(|(&j, l)| l - off[j]).collect();
        (0..self.c.nrows())
            .map(|m| off[k + m] + (0..self.t).map(|i| self.c[(m, i)] * eta[i]).sum::<f64>())
            .collect()
    }

    /// `½ ln |Cᵀ Diag(λ₊) C|` given `ln λ` of the positive-count rows.
    pub(crate) fn log_jeffreys_factor(&self, positive_log_rates: &[f64]) -> f64 {
        0.5 * weighted_gram_log_det(&self.c, positive_log_rates)
    }

    /// `ζ = d⁻¹ (ln λ_l − a₀_l)`, i.e. `ln ξ`.
    pub(crate) fn zeta(&self, data: &RegressionData, ln_lambda_l: &[f64]) -> Result<DVector<f64>> {
        let u = DVector::from_iterator(
            self.l_set.len(),
            self.l_set.iter().zip(ln_lambda_l).map(|(&l, v)| v - data.offsets()[l]),
        );
        self.d
            .clone()
            .lu()
            .solve(&u)
            .ok_or_else(|| Error::Numerical("coefficient matrix d is singular".into()))
    }

    /// Matrix `M = [A_j; Bᵀ]` mapping β to `(ln λ_j − a₀_j, ζ)`.
    pub(crate) fn coordinate_map(&self, data: &RegressionData) -> DMatrix<f64> {
        let q = data.q();
        let a_j = rows_matrix(data, &self.j_set);
        DMatrix::from_fn(q, q, |r, c| if r < self.t { a_j[(r, c)] } else { self.b[(c, r - self.t)] })
    }
}

/// Deterministic construction: the first spanning positive-count rows and
/// the first zero-count rows completing a basis, in index order.
pub fn build_partial_prior(data: &RegressionData) -> Result<PartialPriorSpec> {
    let (n, q, k) = (data.n(), data.q(), data.n_zero());
    let full = rank(data.design());
    if full < q {
        return Err(Error::DesignRank { rank: full, q });
    }
    let t = if n > k { rank(&data.design().rows(k, n - k).into_owned()) } else { 0 };
    if t == q {
        return Err(Error::Precondition("positive-count rows have full rank; use the standard priors".into()));
    }
    let j_set = greedy_extend(data, &[], k..n, t);
    let in_span = in_span_rows(data)?;
    let l_set = greedy_extend(data, &j_set, (0..k).filter(|i| !in_span.contains(i)), q - t);
    if l_set.len() != q - t {
        return Err(Error::Construction("no zero-count rows complete a basis; numerical rank is unreliable".into()));
    }
    PartialPriorSpec::from_selection(data, j_set, l_set)
}

/// Zero-count rows lying in the span of the positive-count rows.
pub(crate) fn in_span_rows(data: &RegressionData) -> Result<Vec<usize>> {
    let (n, k) = (data.n(), data.n_zero());
    if n == k {
        return Ok((0..k).filter(|&i| row_vec(data, i).norm() == 0.0).collect());
    }
    let a_plus = data.design().rows(k, n - k).into_owned();
    let (_, v_plus) = rank_and_basis(&a_plus.transpose(), RANK_TOL);
    Ok((0..k)
        .filter(|&i| {
            let v = row_vec(data, i);
            v.norm() == 0.0 || span_residual(&v, &v_plus) <= RANK_TOL
        })
        .collect())
}

fn check_all_positive(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(Error::Domain(format!("{what} must be positive and finite, got {v}"))),
        None => Ok(()),
    }
}

/// Log density of the partially proper prior at `(λ_j, λ_l)`: the
/// Jeffreys-type factor `∏ λ_j⁻¹ |Cᵀ Diag(λ₊) C|^{1/2}` times the density
/// of `λ_l` induced by independent Exp(1) priors on `ξ`.
pub fn log_partial_prior(lambda_j: &[f64], lambda_l: &[f64], spec: &PartialPriorSpec, data: &RegressionData) -> Result<f64> {
    if lambda_j.len() != spec.t || lambda_l.len() != spec.deficiency() {
        return Err(Error::Domain(format!(
            "expected {} identified and {} unidentified rates, got {} and {}",
            spec.t,
            spec.deficiency(),
            lambda_j.len(),
            lambda_l.len()
        )));
    }
    check_all_positive(lambda_j, "λ_j")?;
    check_all_positive(lambda_l, "λ_l")?;
    Ok(log_partial_jeffreys(lambda_j, spec, data)? + log_partial_proper(lambda_l, spec, data)?)
}

/// Jeffreys-type factor `∏ λ_j⁻¹ |Cᵀ Diag(λ₊) C|^{1/2}` alone.
pub fn log_partial_jeffreys(lambda_j: &[f64], spec: &PartialPriorSpec, data: &RegressionData) -> Result<f64> {
    check_all_positive(lambda_j, "λ_j")?;
    let ln_j: Vec<f64> = lambda_j.iter().map(|v| v.ln()).collect();
    let plus = spec.positive_log_rates(data, &ln_j);
    Ok(spec.log_jeffreys_factor(&plus) - ln_j.iter().sum::<f64>())
}

/// Proper factor: density of `λ_l` induced by Exp(1) priors on `ξ`.
pub fn log_partial_proper(lambda_l: &[f64], spec: &PartialPriorSpec, data: &RegressionData) -> Result<f64> {
    check_all_positive(lambda_l, "λ_l")?;
    let ln_l: Vec<f64> = lambda_l.iter().map(|v| v.ln()).collect();
    let zeta = spec.zeta(data, &ln_l)?;
    let log_det_d = spec.d.determinant().abs().ln();
    Ok(zeta.iter().map(|z| z - z.exp()).sum::<f64>() - log_det_d - ln_l.iter().sum::<f64>())
}

/// The Jeffreys-type factor expressed as a density over the identified
/// coordinates `γ = Uᵀβ`, U an orthonormal basis of the positive-row span.
/// Equal for every valid `j_set`.
pub fn log_partial_jeffreys_on_span(beta: &[f64], spec: &PartialPriorSpec, data: &RegressionData) -> Result<f64> {
    let (n, k) = (data.n(), data.n_zero());
    let a_plus = data.design().rows(k, n - k).into_owned();
    let (_, u) = rank_and_basis(&a_plus.transpose(), RANK_TOL);
    let rates = crate::priors::log_rates(data, beta);
    let lambda_j: Vec<f64> = spec.j_set.iter().map(|&j| rates[j].exp()).collect();
    let a_j_u = rows_matrix(data, &spec.j_set) * &u;
    let jac = a_j_u.determinant().abs().ln();
    Ok(log_partial_jeffreys(&lambda_j, spec, data)? + lambda_j.iter().map(|l| l.ln()).sum::<f64>() + jac)
}

/// Human-readable one-line description, used in reports.
pub fn describe_selection(spec: &PartialPriorSpec) -> String {
    format!("t={} r={} j_set={:?} l_set={:?}", spec.t, spec.r, spec.j_set, spec.l_set)
}
