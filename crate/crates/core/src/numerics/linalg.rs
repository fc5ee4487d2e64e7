//! Dense linear algebra for the small q×q problems that appear here.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

/// Default relative tolerance for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Numerical rank of `matrix` and an orthonormal basis of its column space.
///
/// Singular values below `tol · σ_max` are treated as zero.
pub fn rank_and_basis(matrix: &DMatrix<f64>, tol: f64) -> (usize, DMatrix<f64>) {
    let (nr, nc) = matrix.shape();
    if nr == 0 || nc == 0 {
        return (0, DMatrix::zeros(nr, 0));
    }
    let svd = matrix.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return (0, DMatrix::zeros(nr, 0));
    }
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tol * smax).collect();
    let mut basis = DMatrix::zeros(nr, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    (keep.len(), basis)
}

/// Numerical rank with the default tolerance.
pub fn rank(matrix: &DMatrix<f64>) -> usize {
    rank_and_basis(matrix, RANK_TOL).0
}

/// Least-squares solve `min ‖E z − f‖` through the SVD pseudo-inverse.
fn least_squares(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    if e.nrows() == 0 || e.ncols() == 0 {
        return DVector::zeros(e.ncols());
    }
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(f, RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(e.ncols()))
}

/// Nonnegative least squares by the Lawson–Hanson active-set method.
/// Returns the minimizer `c ≥ 0` of `‖E c − f‖`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let p = e.ncols();
    let mut x = DVector::zeros(p);
    let mut passive = vec![false; p];
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs())) * f.norm().max(1.0);
    let w_tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    for _outer in 0..(3 * p + 10) {
        let w = e.transpose() * (f - e * &x);
        let candidate = (0..p)
            .filter(|&j| !passive[j] && w[j] > w_tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _inner in 0..(3 * p + 10) {
            let idx: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            let ep = DMatrix::from_fn(e.nrows(), idx.len(), |r, c| e[(r, idx[c])]);
            let zp = least_squares(&ep, f);
            let mut z = DVector::zeros(p);
            for (c, &i) in idx.iter().enumerate() {
                z[i] = zp[c];
            }
            if idx.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = 1.0f64;
            for &i in &idx {
                if z[i] <= 0.0 {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            x = &x + (z - &x) * alpha;
            for &i in &idx {
                if x[i] <= 1e-15 * scale.max(1.0) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    x
}

/// Whether `target` lies (to tolerance) in the cone generated by `basis`.
///
/// Feasible means `min_{c ≥ 0} ‖target − Σ cₘ basisₘ‖ ≤ tol · (1 + ‖target‖)`.
/// An empty basis generates only the origin.
pub fn nnls_feasible(target: &[f64], basis: &[Vec<f64>], tol: f64) -> (bool, Vec<f64>) {
    let tnorm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    if basis.is_empty() {
        return (tnorm <= tol, Vec::new());
    }
    let m = target.len();
    assert!(basis.iter().all(|b| b.len() == m), "basis vectors must match the target dimension");
    let e = DMatrix::from_fn(m, basis.len(), |r, c| basis[c][r]);
    let f = DVector::from_column_slice(target);
    let c = nnls(&e, &f);
    let resid = (&f - &e * &c).norm();
    (resid <= tol * (1.0 + tnorm), c.iter().cloned().collect())
}

/// `ln det Σᵢ exp(log_w[i]) aᵢaᵢᵀ` for the rows `aᵢ` of `rows`.
///
/// Computed from a Householder QR of the rescaled rows
/// `exp((log_w[i] − max)/2) aᵢ`, so the Gram matrix is never formed. Returns
/// −∞ when fewer rows than columns are present or the factor is exactly singular.
pub fn weighted_gram_log_det(rows: &DMatrix<f64>, log_w: &[f64]) -> f64 {
    let (n, q) = rows.shape();
    debug_assert_eq!(n, log_w.len());
    if q == 0 {
        return 0.0;
    }
    if n < q {
        return f64::NEG_INFINITY;
    }
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return if m == f64::NEG_INFINITY { f64::NEG_INFINITY } else { f64::NAN };
    }
    let scaled = DMatrix::from_fn(n, q, |r, c| (0.5 * (log_w[r] - m)).exp() * rows[(r, c)]);
    let r = scaled.qr().r();
    let mut acc = q as f64 * m;
    for i in 0..q {
        let d = r[(i, i)].abs();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += 2.0 * d.ln();
    }
    acc
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l())
}
