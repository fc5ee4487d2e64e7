//! Poisson log-linear likelihood mode by damped Newton iteration.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use super::linalg::rank;
use crate::error::{Error, Result};
use crate::regression::RegressionData;

const MAX_ITER: usize = 100;

fn log_lik(design: &DMatrix<f64>, y: &[f64], offsets: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    (0..y.len()).map(|i| {
        let e = offsets[i] + eta[i];
        y[i] * e - e.exp()
    })
    .sum()
}

/// Maximize `Σ yᵢηᵢ − exp(ηᵢ)`, `η = offsets + Aβ`, for real-valued
/// responses `y ≥ 0`. Returns the mode and the negative Hessian there.
pub(crate) fn fit_poisson(
    design: &DMatrix<f64>,
    y: &[f64],
    offsets: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, q) = design.shape();
    if q == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    if n == 0 || rank(design) < q {
        return Err(Error::Precondition(format!(
            "Poisson mode needs a design of full column rank {q}; selected rows have rank {}",
            rank(design)
        )));
    }
    // Start from least squares on log(y + 1/2).
    let z = DVector::from_iterator(n, (0..n).map(|i| (y[i] + 0.5).ln() - offsets[i]));
    let svd = design.clone().svd(true, true);
    let mut beta = svd
        .solve(&z, 1e-12)
        .map_err(|e| Error::Numerical(format!("initial least squares failed: {e}")))?;

    let mut ll = log_lik(design, y, offsets, &beta);
    for _ in 0..MAX_ITER {
        let eta = design * &beta;
        let mu: Vec<f64> = (0..n).map(|i| (offsets[i] + eta[i]).exp()).collect();
        let mut grad = DVector::zeros(q);
        let mut hess = DMatrix::zeros(q, q);
        for i in 0..n {
            let a = design.row(i).transpose();
            grad += &a * (y[i] - mu[i]);
            hess += (&a * a.transpose()) * mu[i];
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return Err(Error::Numerical("Poisson information matrix is not positive definite".into())),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &step * t;
            let cll = log_lik(design, y, offsets, &cand);
            if cll.is_finite() && cll >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical("Poisson Newton line search failed".into()));
        }
        if (&step * t).amax() < 1e-10 {
            let eta = design * &beta;
            let mut info = DMatrix::zeros(q, q);
            for i in 0..n {
                let a = design.row(i).transpose();
                info += (&a * a.transpose()) * (offsets[i] + eta[i]).exp();
            }
            return Ok((beta, info));
        }
    }
    Err(Error::Numerical(format!("Poisson Newton iteration did not converge in {MAX_ITER} iterations")))
}

/// Rows used for the fit: all rows, or only the positive-count rows.
fn selected(data: &RegressionData, positive_only: bool) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let start = if positive_only { data.n_zero() } else { 0 };
    let n = data.n() - start;
    let design = data.design().rows(start, n).into_owned();
    let y = data.counts()[start..].iter().map(|&c| c as f64).collect();
    let off = data.offsets()[start..].to_vec();
    (design, y, off)
}

/// Poisson maximum-likelihood mode of β and the observed information there,
/// using every row or only the rows with positive counts.
pub fn poisson_mode(data: &RegressionData, positive_only: bool) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (design, y, off) = selected(data, positive_only);
    fit_poisson(&design, &y, &off)
}

/// Mode with every response raised by `pseudo`. Exists whenever the
/// selected rows have full column rank, even when every count is zero.
pub(crate) fn poisson_mode_augmented(
    data: &RegressionData,
    positive_only: bool,
    pseudo: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (design, mut y, off) = selected(data, positive_only);
    y.iter_mut().for_each(|v| *v += pseudo);
    fit_poisson(&design, &y, &off)
}
