use alloc::format;
#[allow(unused_imports)] // unused when std is linked and provides the inherent methods
use num_traits::Float;

use crate::error::{Error, Result};

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a finite x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Γ(x)` for internal callers that have already validated `x > 0`.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `ln(n!)` for a nonnegative integer.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln Σ exp(tᵢ)`, stable for terms of any magnitude.
pub fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty sequence".into()));
    }
    let mut acc = LogSumAccumulator::new();
    for &t in terms {
        acc.push(t);
    }
    Ok(acc.value())
}

/// Streaming log-sum-exp. Keeps a running maximum and a rescaled sum so
/// that arbitrarily many terms can be folded in one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumAccumulator {
    max: f64,
    sum: f64,
}

impl Default for LogSumAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumAccumulator {
    pub const fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t.is_nan() {
            self.max = f64::NAN;
            return;
        }
        if t <= self.max {
            self.sum += (t - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    /// Merge another accumulator as if its terms had been pushed here.
    pub fn merge(&mut self, other: &Self) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}
