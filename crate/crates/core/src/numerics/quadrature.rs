//! Deterministic quadrature: adaptive Gauss–Kronrod on the half line and
//! composite tensor Gauss–Legendre on standardized boxes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use super::special::LogSumAccumulator;
use super::{IntegrationConfig, LogEstimate};
use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452218,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const SCAN_POINTS: usize = 512;
const INITIAL_PANELS: usize = 64;
const MAX_PANELS: usize = 6000;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let f_center = f(center);
    let mut res_k = WGK[10] * f_center;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, error }
}

/// Globally adaptive bisection driven by the panel with the largest error.
fn adaptive<F: Fn(f64) -> f64>(f: &F, breakpoints: &[f64], rel_tol: f64) -> (f64, f64, usize, bool) {
    let mut panels: Vec<Panel> = breakpoints.windows(2).map(|w| gauss_kronrod_21(f, w[0], w[1])).collect();
    let mut evals = 21 * panels.len();
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= rel_tol * total.abs() || error <= f64::MIN_POSITIVE {
            return (total, error, evals, true);
        }
        if panels.len() >= MAX_PANELS {
            return (total, error, evals, false);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.error > 0.0)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("positive total error implies a panel with positive error");
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Panel cannot be split further in floating point; accept it.
            panels[worst].error = 0.0;
            continue;
        }
        panels[worst] = gauss_kronrod_21(f, p.a, mid);
        panels.push(gauss_kronrod_21(f, mid, p.b));
        evals += 42;
    }
}

/// `ln ∫₀^∞ exp(log_f(λ)) dλ`.
///
/// The half line is mapped onto (0, 1) with λ = t/(1−t). The integrand is
/// rescaled by its maximum on a scan grid before adaptive Gauss–Kronrod
/// panels are applied, so `log_f` may take values far outside the range of
/// `f64::exp`.
pub fn integrate_1d<F: Fn(f64) -> f64>(log_f: F, cfg: &IntegrationConfig) -> Result<LogEstimate> {
    let rel_tol = cfg.quad_rel_tol;
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("quad_rel_tol must be positive, got {rel_tol}")));
    }
    let g = |t: f64| -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return f64::NEG_INFINITY;
        }
        let om = 1.0 - t;
        log_f(t / om) - 2.0 * om.ln()
    };

    let mut best_t = 0.5;
    let mut shift = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..SCAN_POINTS {
        let t = (i as f64 + 0.5) / SCAN_POINTS as f64;
        let v = g(t);
        if v.is_nan() {
            return Err(Error::Numerical(format!("integrand is NaN at λ = {}", t / (1.0 - t))));
        }
        if v > shift {
            shift = v;
            best_t = t;
            best_i = i;
        }
    }
    if shift == f64::NEG_INFINITY {
        let mut est = LogEstimate::deterministic(f64::NEG_INFINITY, SCAN_POINTS);
        est.warnings.push("integrand vanishes on the scan grid".into());
        return Ok(est);
    }
    if shift == f64::INFINITY {
        return Err(Error::Numerical("integrand is infinite on the scan grid".into()));
    }

    // Golden-section refinement of the peak between neighbouring scan points.
    let h = 1.0 / SCAN_POINTS as f64;
    let (mut lo, mut hi) = ((best_i as f64 - 0.5) * h, (best_i as f64 + 1.5) * h);
    lo = lo.max(0.0);
    hi = hi.min(1.0);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..60 {
        if g1 >= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - phi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + phi * (hi - lo);
            g2 = g(x2);
        }
    }
    let peak_t = 0.5 * (lo + hi);
    let peak = g(peak_t);
    if peak > shift && peak.is_finite() {
        shift = peak;
        best_t = peak_t;
    }

    let mut breaks: Vec<f64> = (0..=INITIAL_PANELS).map(|i| i as f64 / INITIAL_PANELS as f64).collect();
    if best_t > 0.0 && best_t < 1.0 {
        breaks.push(best_t);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }

    let f = |t: f64| {
        let v = g(t) - shift;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    let (total, error, evals, converged) = adaptive(&f, &breaks, rel_tol);
    let log_value = if total > 0.0 { shift + total.ln() } else { f64::NEG_INFINITY };
    if !converged {
        return Err(Error::Accuracy {
            estimate: log_value,
            message: format!("relative error estimate {:.3e} after {evals} evaluations", error / total.abs()),
        });
    }
    Ok(LogEstimate::deterministic(log_value, evals + SCAN_POINTS))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            let dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        // Recompute the derivative at the converged node.
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let dp = if n > 1 { nf * (x * p1 - p0) / (x * x - 1.0) } else { 1.0 };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Panel edges on [0, radius]: uniform panels of `width` out to `core`,
/// then panels doubling in width until the radius is reached.
fn graded_edges(radius: f64, core: f64, width: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let mut x = 0.0;
    let mut w = width;
    while x < radius {
        if x >= core {
            w *= 2.0;
        }
        x = (x + w).min(radius);
        edges.push(x);
    }
    edges
}

/// Composite Gauss–Legendre rule on [−radius, radius], symmetric about zero,
/// fine near the center and coarse in the tails. Weights are returned as logs.
pub(crate) fn graded_rule(radius: f64, core: f64, width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let edges = graded_edges(radius, core, width);
    let mut nodes = Vec::new();
    let mut log_w = Vec::new();
    for pair in edges.windows(2) {
        let half = 0.5 * (pair[1] - pair[0]);
        let mid = 0.5 * (pair[1] + pair[0]);
        for (xi, wi) in x.iter().zip(&w) {
            for sign in [-1.0, 1.0] {
                nodes.push(sign * (mid + half * xi));
                log_w.push((half * wi).ln());
            }
        }
    }
    (nodes, log_w)
}

/// Inner panel width and per-panel order used by the tensor rule in `dim` dimensions.
fn box_resolution(dim: usize) -> (f64, usize) {
    match dim {
        1 => (0.5, 16),
        2 => (1.0, 10),
        _ => (2.0, 8),
    }
}

/// Half-width, in curvature units, of the uniformly resolved core of the box.
const BOX_CORE: f64 = 6.0;

/// `ln ∫ exp(log_f(β)) dβ` over the box β = center + L z, z ∈ [−radius, radius]^d,
/// where `scale` is the lower-triangular L. Uses a composite tensor
/// Gauss–Legendre rule; the result is a truncated integral.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    log_f: F,
    center: &[f64],
    scale: &DMatrix<f64>,
    radius: f64,
) -> Result<LogEstimate> {
    let dim = center.len();
    if dim == 0 || scale.nrows() != dim || scale.ncols() != dim {
        return Err(Error::Domain("box center and scale dimensions disagree".into()));
    }
    let log_jac: f64 = (0..dim).map(|i| scale[(i, i)].abs().ln()).sum();
    if !log_jac.is_finite() {
        return Err(Error::Numerical("degenerate box scale".into()));
    }
    let (width, order) = box_resolution(dim);
    let (nodes, log_w) = graded_rule(radius, BOX_CORE, width, order);
    let m = nodes.len();

    let mut idx = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    let mut beta = vec![0.0; dim];
    let mut acc = LogSumAccumulator::new();
    let mut evals = 0usize;
    loop {
        let mut lw = 0.0;
        for d in 0..dim {
            z[d] = nodes[idx[d]];
            lw += log_w[idx[d]];
        }
        for r in 0..dim {
            let mut v = center[r];
            for c in 0..=r {
                v += scale[(r, c)] * z[c];
            }
            beta[r] = v;
        }
        let lf = log_f(&beta);
        if lf.is_nan() {
            return Err(Error::Numerical(format!("integrand is NaN at {beta:?}")));
        }
        acc.push(lw + lf);
        evals += 1;

        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return Ok(LogEstimate::deterministic(acc.value() + log_jac, evals));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::ln_gamma;

    fn cfg() -> IntegrationConfig {
        IntegrationConfig::default()
    }

    #[test]
    fn unit_exponential_integral() {
        let est = integrate_1d(|l| -l, &cfg()).unwrap();
        assert!(est.log_value.abs() < 1e-10, "{}", est.log_value);
        assert_eq!(est.rel_se, 0.0);
    }

    #[test]
    fn endpoint_singularity_gives_sqrt_pi() {
        let est = integrate_1d(|l: f64| -l - 0.5 * l.ln(), &cfg()).unwrap();
        let expected = 0.5 * core::f64::consts::PI.ln();
        assert!((est.log_value - expected).abs() < 1e-9, "{} vs {}", est.log_value, expected);
    }

    #[test]
    fn gamma_integral_example() {
        // ∫ e^{-2λ} λ^{3/2} dλ = Γ(5/2) 2^{-5/2}, frozen at 40 digits.
        let expected = -1.448185080926944113910585633962739495869;
        let est = integrate_1d(|l: f64| -2.0 * l + 1.5 * l.ln(), &cfg()).unwrap();
        assert!((est.log_value - expected).abs() < 1e-9);
    }

    #[test]
    fn gamma_grid_reproduced_to_tolerance() {
        for &z in &[0.5, 1.0, 2.5, 7.0] {
            for &c in &[0.5, 1.0, 3.0] {
                let expected = ln_gamma(z) - z * f64::ln(c);
                let est = integrate_1d(|l: f64| -c * l + (z - 1.0) * l.ln(), &cfg()).unwrap();
                assert!(
                    (est.log_value - expected).abs() < 1e-9,
                    "z = {z}, c = {c}: {} vs {expected}",
                    est.log_value
                );
            }
        }
    }

    #[test]
    fn huge_log_values_do_not_overflow() {
        // ∫ e^{-λ} λ^{799} = Γ(800), far beyond f64 range.
        let est = integrate_1d(|l: f64| -l + 799.0 * l.ln(), &cfg()).unwrap();
        let expected = ln_gamma(800.0);
        assert!(((est.log_value - expected) / expected).abs() < 1e-10);
    }

    #[test]
    fn vanishing_integrand_is_flagged() {
        let est = integrate_1d(|_| f64::NEG_INFINITY, &cfg()).unwrap();
        assert!(est.is_divergent());
        assert!(!est.warnings.is_empty());
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..40 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            // ∫_{-1}^{1} x^{2n-2} dx = 2/(2n-1)
            let deg = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n = {n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn box_rule_integrates_gaussian() {
        let ln_2pi = (2.0 * core::f64::consts::PI).ln();
        for dim in 1..=3 {
            let center = vec![0.3; dim];
            let scale = DMatrix::<f64>::identity(dim, dim) * 1.5;
            let est = integrate_box(
                |b: &[f64]| {
                    let q: f64 = b.iter().map(|x| (x - 0.3) * (x - 0.3)).sum::<f64>() / (2.0 * 2.25);
                    -q - 0.5 * dim as f64 * (ln_2pi + 2.25f64.ln())
                },
                &center,
                &scale,
                12.0,
            )
            .unwrap();
            assert!(est.log_value.abs() < 1e-8, "dim {dim}: {}", est.log_value);
        }
    }
}
