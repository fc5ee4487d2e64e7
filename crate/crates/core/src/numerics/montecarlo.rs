//! Seeded importance sampling with a multivariate Student-t proposal.
//!
//! Samples are drawn in fixed-size chunks. Chunk `c` uses its own ChaCha
//! stream (`set_stream(c)`) under the configured seed, so a chunk's draws do
//! not depend on which thread evaluates it or on how many chunks run.
//! Chunk statistics are merged strictly in chunk order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::linalg::cholesky_lower;
use super::special::{ln_gamma, LogSumAccumulator};
use super::{IntegrationConfig, LogEstimate};
use crate::error::{Error, Result};

/// Samples per chunk. Totals are rounded up to a multiple of this.
pub const CHUNK_SIZE: usize = 1024;
/// Adaptive extension stops at this multiple of `mc_samples`.
const MAX_GROWTH: usize = 16;
/// Effective sample size below this fraction of the draws is reported as degenerate.
const MIN_ESS_FRACTION: f64 = 0.01;

/// Elliptical Student-t proposal `x = location + L y`, `y ~ t_df(0, I)`.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub location: DVector<f64>,
    /// Lower-triangular scale factor L.
    pub scale: DMatrix<f64>,
    pub df: f64,
    log_norm: f64,
}

impl Proposal {
    pub fn new(location: DVector<f64>, scale: DMatrix<f64>, df: f64) -> Result<Self> {
        let d = location.len();
        if scale.shape() != (d, d) {
            return Err(Error::Domain("proposal scale must be square and match the location".into()));
        }
        if !(df > 0.0) {
            return Err(Error::Domain(format!("proposal df must be positive, got {df}")));
        }
        let log_det: f64 = (0..d).map(|i| scale[(i, i)].abs().ln()).sum();
        if !log_det.is_finite() {
            return Err(Error::Numerical("proposal scale is singular".into()));
        }
        let df_d = d as f64;
        let log_norm = ln_gamma(0.5 * (df + df_d))
            - ln_gamma(0.5 * df)
            - 0.5 * df_d * (df * core::f64::consts::PI).ln()
            - log_det;
        Ok(Self { location, scale, df, log_norm })
    }

    /// Proposal centered at `mode` with scale `inflation · chol(precision⁻¹)`.
    pub fn from_curvature(mode: DVector<f64>, precision: &DMatrix<f64>, df: f64, inflation: f64) -> Result<Self> {
        let cov = precision
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("curvature matrix is singular".into()))?;
        let cov = (&cov + cov.transpose()) * 0.5;
        let l = cholesky_lower(&cov).ok_or_else(|| Error::Numerical("inverse curvature is not positive definite".into()))?;
        Self::new(mode, l * inflation, df)
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Log density at standardized coordinates `y` (x = location + L y).
    fn log_density_std(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        self.log_norm - 0.5 * (self.df + self.dim() as f64) * (r2 / self.df).ln_1p()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(self.dim(), x.iter().zip(self.location.iter()).map(|(a, b)| a - b));
        let y = self
            .scale
            .solve_lower_triangular(&diff)
            .expect("scale is nonsingular by construction");
        self.log_density_std(y.as_slice())
    }
}

/// Importance-weight statistics of one chunk (or a merged run of chunks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkStats {
    pub sum_w: LogSumAccumulator,
    pub sum_w2: LogSumAccumulator,
    pub n: usize,
    pub non_finite: usize,
}

impl ChunkStats {
    pub fn empty() -> Self {
        Self { sum_w: LogSumAccumulator::new(), sum_w2: LogSumAccumulator::new(), n: 0, non_finite: 0 }
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum_w.merge(&other.sum_w);
        self.sum_w2.merge(&other.sum_w2);
        self.n += other.n;
        self.non_finite += other.non_finite;
    }
}

/// Executes chunk jobs. Implementations may run them concurrently but must
/// return results indexed in the order of `chunks`.
pub trait ChunkRunner {
    fn run(&self, chunks: Range<usize>, job: &(dyn Fn(usize) -> ChunkStats + Sync)) -> Vec<ChunkStats>;
}

/// Runs chunks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialRunner;

impl ChunkRunner for SerialRunner {
    fn run(&self, chunks: Range<usize>, job: &(dyn Fn(usize) -> ChunkStats + Sync)) -> Vec<ChunkStats> {
        chunks.map(job).collect()
    }
}

fn run_chunk<F: Fn(&[f64]) -> f64>(chunk: usize, seed: u64, log_f: &F, proposal: &Proposal) -> ChunkStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let chi2 = ChiSquared::new(proposal.df).expect("df validated positive");
    let d = proposal.dim();
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut stats = ChunkStats::empty();
    for _ in 0..CHUNK_SIZE {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let u: f64 = chi2.sample(&mut rng);
        let mix = (proposal.df / u).sqrt();
        for v in z.iter_mut() {
            *v *= mix;
        }
        for r in 0..d {
            let mut acc = proposal.location[r];
            for c in 0..=r {
                acc += proposal.scale[(r, c)] * z[c];
            }
            x[r] = acc;
        }
        let lw = log_f(&x) - proposal.log_density_std(&z);
        stats.n += 1;
        if lw.is_nan() || lw == f64::INFINITY {
            stats.non_finite += 1;
            continue;
        }
        stats.sum_w.push(lw);
        stats.sum_w2.push(2.0 * lw);
    }
    stats
}

fn summarize(stats: &ChunkStats) -> (f64, f64, f64) {
    let n = stats.n as f64;
    let l1 = stats.sum_w.value();
    let l2 = stats.sum_w2.value();
    if l1 == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::INFINITY, 0.0);
    }
    let ratio = (l2 - 2.0 * l1).exp();
    let rel_se = (ratio - 1.0 / n).max(0.0).sqrt();
    (l1 - n.ln(), rel_se, 1.0 / ratio)
}

/// `ln ∫ exp(log_f(x)) dx` by importance sampling, serial execution.
pub fn integrate_mc<F: Fn(&[f64]) -> f64 + Sync>(
    log_f: F,
    proposal: &Proposal,
    cfg: &IntegrationConfig,
) -> Result<LogEstimate> {
    integrate_mc_with(&SerialRunner, log_f, proposal, cfg)
}

/// Importance sampling with a caller-supplied chunk executor. Results are
/// bit-identical for every runner that honours the ordering contract.
///
/// Starts with `mc_samples` draws and doubles while the relative standard
/// error exceeds `target_rel_se`, up to sixteen times the initial budget.
pub fn integrate_mc_with<R: ChunkRunner + ?Sized, F: Fn(&[f64]) -> f64 + Sync>(
    runner: &R,
    log_f: F,
    proposal: &Proposal,
    cfg: &IntegrationConfig,
) -> Result<LogEstimate> {
    cfg.validate()?;
    let initial = cfg.mc_samples.div_ceil(CHUNK_SIZE);
    let max_chunks = initial * MAX_GROWTH;
    let seed = cfg.seed;
    let job = |c: usize| run_chunk(c, seed, &log_f, proposal);

    let mut total = ChunkStats::empty();
    let mut done = 0;
    let mut target = initial;
    loop {
        for s in runner.run(done..target, &job) {
            total.merge(&s);
        }
        done = target;
        let (_, rel_se, _) = summarize(&total);
        if rel_se <= cfg.target_rel_se || done >= max_chunks {
            break;
        }
        target = (2 * done).min(max_chunks);
    }

    let (log_value, rel_se, ess) = summarize(&total);
    let mut warnings = Vec::new();
    if total.non_finite > 0 {
        warnings.push(format!("{} importance weights were NaN or infinite and were dropped", total.non_finite));
    }
    if log_value == f64::NEG_INFINITY {
        warnings.push("every importance weight is zero; integral estimate is zero".into());
    } else {
        if ess < MIN_ESS_FRACTION * total.n as f64 {
            warnings.push(format!(
                "importance sampling is degenerate: effective sample size {:.1} of {} draws",
                ess, total.n
            ));
        }
        if rel_se > cfg.target_rel_se {
            warnings.push(format!(
                "relative standard error {:.3e} exceeds target {:.3e} after {} draws",
                rel_se, cfg.target_rel_se, total.n
            ));
        }
    }
    Ok(LogEstimate { log_value, rel_se, n_evals: total.n, ess: Some(ess), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_1d, mode::find_mode};

    fn std_proposal(d: usize, df: f64) -> Proposal {
        Proposal::new(DVector::zeros(d), DMatrix::identity(d, d), df).unwrap()
    }

    #[test]
    fn normalized_gaussian_integrates_to_one() {
        let cfg = IntegrationConfig::default().with_seed(7);
        let ln_2pi = (2.0 * core::f64::consts::PI).ln();
        let est = integrate_mc(|x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1]) - ln_2pi, &std_proposal(2, 5.0), &cfg)
            .unwrap();
        assert!(est.log_value.abs() < 3.0 * est.rel_se, "{} ± {}", est.log_value, est.rel_se);
        assert!(est.rel_se > 0.0 && est.rel_se < 0.02);
        assert!(est.warnings.is_empty(), "{:?}", est.warnings);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = IntegrationConfig::default().with_seed(99).with_mc_samples(4096);
        let f = |x: &[f64]| -0.5 * x[0] * x[0] - 0.1 * x[0].powi(4);
        let a = integrate_mc(f, &std_proposal(1, 5.0), &cfg).unwrap();
        let b = integrate_mc(f, &std_proposal(1, 5.0), &cfg).unwrap();
        assert_eq!(a.log_value.to_bits(), b.log_value.to_bits());
        assert_eq!(a.rel_se.to_bits(), b.rel_se.to_bits());
        let c = integrate_mc(f, &std_proposal(1, 5.0), &cfg.clone().with_seed(100)).unwrap();
        assert_ne!(a.log_value.to_bits(), c.log_value.to_bits());
    }

    #[test]
    fn constant_log_density_is_flagged() {
        // ∫ 1 dx over R² is infinite; the weights 1/q have infinite mean.
        let cfg = IntegrationConfig::default().with_seed(3);
        let est = integrate_mc(|_: &[f64]| 0.0, &std_proposal(2, 5.0), &cfg).unwrap();
        assert!(est.warnings.iter().any(|w| w.contains("degenerate")), "{:?}", est);
    }

    #[test]
    fn zero_integrand_is_flagged() {
        let cfg = IntegrationConfig::default().with_mc_samples(1024);
        let est = integrate_mc(|_: &[f64]| f64::NEG_INFINITY, &std_proposal(1, 5.0), &cfg).unwrap();
        assert!(est.is_divergent());
        assert!(!est.warnings.is_empty());
    }

    #[test]
    fn agrees_with_adaptive_quadrature_on_gamma_integrand() {
        // ∫ e^{-cλ} λ^{z-1} dλ written in β = ln λ.
        for &(z, c) in &[(2.5, 1.0), (7.0, 3.0), (0.5, 0.5)] {
            let log_f = move |b: &[f64]| z * b[0] - c * b[0].exp();
            let fit = find_mode(log_f, &[0.0], &[1.0]).unwrap();
            let prop = Proposal::from_curvature(fit.mode, &fit.neg_hessian, 5.0, 1.2).unwrap();
            let cfg = IntegrationConfig::default().with_seed(11);
            let mc = integrate_mc(log_f, &prop, &cfg).unwrap();
            let quad = integrate_1d(move |l: f64| -c * l + (z - 1.0) * l.ln(), &cfg).unwrap();
            assert!(
                (mc.log_value - quad.log_value).abs() < 3.0 * mc.rel_se,
                "z={z} c={c}: {} vs {} (se {})",
                mc.log_value,
                quad.log_value,
                mc.rel_se
            );
        }
    }

    #[test]
    fn proposal_density_is_normalized() {
        let l = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.4, 0.7]);
        let p = Proposal::new(DVector::from_column_slice(&[0.5, -1.0]), l.clone(), 5.0).unwrap();
        // Integrate the density with itself as proposal: weights are all one.
        let cfg = IntegrationConfig::default().with_mc_samples(2048);
        let est = integrate_mc(|x: &[f64]| p.log_density(x), &p, &cfg).unwrap();
        assert!(est.log_value.abs() < 1e-12);
        assert!(est.rel_se < 1e-6);
    }
}
