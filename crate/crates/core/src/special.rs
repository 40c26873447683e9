//! Log-domain scalar kernels shared by every normalizer.
//!
//! All quantities are natural logarithms. An underlying value of zero is
//! represented by `f64::NEG_INFINITY`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A real number in the log domain, in nats.
pub type LogValue = f64;

/// `ln Γ(a)` for `a > 0`.
pub fn log_gamma(a: f64) -> Result<LogValue> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a finite a > 0, got {a}")));
    }
    Ok(statrs::function::gamma::ln_gamma(a))
}

/// `ln Γ_m(a) = m(m-1)/4 · ln π + Σ_{j=1..m} ln Γ(a + (1-j)/2)`.
///
/// Defined for `a > (m-1)/2`; smaller arguments correspond to a sample too
/// small for a full-rank `m × m` covariance.
pub fn log_multivariate_gamma(m: usize, a: f64) -> Result<LogValue> {
    if m == 0 {
        return Err(Error::Domain("multivariate gamma needs m >= 1".into()));
    }
    let floor = (m as f64 - 1.0) / 2.0;
    if !(a > floor) {
        return Err(Error::Domain(format!(
            "log_multivariate_gamma(m={m}, a={a}) requires a > {floor}"
        )));
    }
    let mf = m as f64;
    let mut acc = mf * (mf - 1.0) / 4.0 * PI.ln();
    for j in 1..=m {
        acc += log_gamma(a + (1.0 - j as f64) / 2.0)?;
    }
    Ok(acc)
}

/// `ln Σ exp(v_i)` by max-shift. Empty input gives `-∞`.
pub fn log_sum_exp(values: &[LogValue]) -> LogValue {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: LogValue, b: LogValue) -> LogValue {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Table of `ln k!` for `k = 0..=n`.
pub(crate) fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}
