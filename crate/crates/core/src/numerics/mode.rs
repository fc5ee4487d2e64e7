//! Mode and curvature of a smooth log-integrand by damped Newton iteration
//! on finite-difference derivatives. Used to place importance-sampling
//! proposals and quadrature boxes.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const FD_STEP: f64 = 1e-4;

/// Mode of a log-integrand with its negative Hessian.
#[derive(Debug, Clone)]
pub struct ModeFit {
    pub mode: DVector<f64>,
    pub neg_hessian: DMatrix<f64>,
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> f64 {
    f(x.as_slice())
}

/// Central-difference gradient and Hessian with per-coordinate steps `h`.
fn derivatives<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>, h: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = x.len();
    let f0 = eval(f, x);
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    let mut plus = Vec::with_capacity(d);
    let mut minus = Vec::with_capacity(d);
    for i in 0..d {
        xp[i] = x[i] + h[i];
        let fp = eval(f, &xp);
        xp[i] = x[i] - h[i];
        let fm = eval(f, &xp);
        xp[i] = x[i];
        plus.push(fp);
        minus.push(fm);
        grad[i] = (fp - fm) / (2.0 * h[i]);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut pp = x.clone();
            pp[i] += h[i];
            pp[j] += h[j];
            let mut pm = x.clone();
            pm[i] += h[i];
            pm[j] -= h[j];
            let mut mp = x.clone();
            mp[i] -= h[i];
            mp[j] += h[j];
            let mut mm = x.clone();
            mm[i] -= h[i];
            mm[j] -= h[j];
            let v = (eval(f, &pp) - eval(f, &pm) - eval(f, &mp) + eval(f, &mm)) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (f0, grad, hess)
}

/// Find the mode of `log_f` starting at `start`. `scale` gives a rough
/// standard deviation per coordinate and sets the finite-difference steps.
pub fn find_mode<F: Fn(&[f64]) -> f64>(log_f: F, start: &[f64], scale: &[f64]) -> Result<ModeFit> {
    let d = start.len();
    let h: Vec<f64> = scale.iter().map(|s| FD_STEP * s.abs().max(1e-3)).collect();
    let mut x = DVector::from_column_slice(start);
    let mut fx = eval(&log_f, &x);
    if !fx.is_finite() {
        return Err(Error::Numerical("log-integrand is not finite at the starting point".into()));
    }
    for _ in 0..MAX_ITER {
        let (_, grad, hess) = derivatives(&log_f, &x, &h);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient while locating the mode".into()));
        }
        let neg = -&hess;
        let dir = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            // Not concave here: scaled gradient ascent.
            None => DVector::from_iterator(d, (0..d).map(|i| grad[i] * scale[i] * scale[i])),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let cand = &x + &dir * t;
            let fc = eval(&log_f, &cand);
            if fc.is_finite() && fc >= fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        let step_size = (0..d).map(|i| (dir[i] * t / scale[i].abs().max(1e-3)).abs()).fold(0.0, f64::max);
        if !moved || step_size < 1e-7 {
            let (_, _, hess) = derivatives(&log_f, &x, &h);
            let neg_hessian = -hess;
            if neg_hessian.clone().cholesky().is_none() {
                return Err(Error::Numerical("curvature at the located mode is not positive definite".into()));
            }
            return Ok(ModeFit { mode: x, neg_hessian });
        }
    }
    Err(Error::Numerical("mode search did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_gaussian_mode_and_precision() {
        let f = |x: &[f64]| -0.5 * ((x[0] - 1.0) * (x[0] - 1.0) * 4.0 + (x[1] + 2.0) * (x[1] + 2.0) / 9.0);
        let fit = find_mode(f, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((fit.mode[0] - 1.0).abs() < 1e-6);
        assert!((fit.mode[1] + 2.0).abs() < 1e-5);
        assert!((fit.neg_hessian[(0, 0)] - 4.0).abs() < 1e-4);
        assert!((fit.neg_hessian[(1, 1)] - 1.0 / 9.0).abs() < 1e-4);
    }

    #[test]
    fn gamma_shaped_in_log_coordinates() {
        // exp(z β − c e^β) peaks at e^β = z / c.
        let (z, c) = (3.5, 2.0);
        let fit = find_mode(|b: &[f64]| z * b[0] - c * b[0].exp(), &[0.0], &[1.0]).unwrap();
        assert!((fit.mode[0] - (z / c).ln()).abs() < 1e-6);
        assert!((fit.neg_hessian[(0, 0)] - z).abs() < 1e-4);
    }

    #[test]
    fn unbounded_direction_fails() {
        assert!(find_mode(|b: &[f64]| -0.5 * b[0], &[0.0], &[1.0]).is_err());
    }
}
