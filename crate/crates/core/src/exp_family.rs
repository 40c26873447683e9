//! NML code-lengths for one-parameter exponential-family members whose MLE
//! and maximized-likelihood integral both have closed forms.
//!
//! A family with density `h(x) exp{η(θ)ᵀT(x) − A(η(θ))}` has an MLE that is a
//! function of the averaged sufficient statistic. When the density of that
//! MLE, evaluated at its own value, integrates analytically over a bounded
//! parameter region `Y(α)`, the NML normalizer is finite and closed-form.
//! Each family here supplies those pieces through [`ExpFamilyModel`].
//!
//! The construction assumes the parameter parts are independent so that the
//! MLE density factorizes. Both families below have a single scalar
//! parameter, where this holds trivially; the assumption is not checked for
//! new implementors.

use crate::error::{Error, Result};
use crate::special::{log_gamma, softplus, LogValue};
use crate::CodeLength;

/// A family with an analytic MLE and an analytic log-normalizer over a
/// restricted parameter domain.
pub trait ExpFamilyModel {
    type Param: Copy + std::fmt::Debug;

    /// Maximum-likelihood estimate from the data.
    fn mle(&self, x: &[f64]) -> Result<Self::Param>;

    /// `ln f(x; θ)` for the whole sequence.
    fn log_likelihood(&self, x: &[f64], theta: Self::Param) -> f64;

    /// Whether an MLE lies inside the restricted domain `Y(α)`.
    fn contains(&self, theta: Self::Param) -> bool;

    /// `ln C` for sequences of length `n` over the restricted domain.
    fn log_normalizer(&self, n: usize) -> Result<LogValue>;
}

/// `−ln f(x; θ̂(x)) + ln C`.
pub fn nml_codelength<M: ExpFamilyModel>(model: &M, x: &[f64]) -> Result<CodeLength> {
    let theta = model.mle(x)?;
    if !model.contains(theta) {
        return Err(Error::OutOfDomain(format!(
            "MLE {theta:?} lies outside the restricted domain"
        )));
    }
    Ok(-model.log_likelihood(x, theta) + model.log_normalizer(x.len())?)
}

/// Gamma distribution with known shape `k` and scale restricted to
/// `[theta_min, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaModel {
    k: f64,
    theta_min: f64,
    theta_max: f64,
}

impl GammaModel {
    pub fn new(k: f64, theta_min: f64, theta_max: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("gamma shape must be positive, got {k}")));
        }
        if !(theta_min > 0.0) {
            return Err(Error::Domain(format!("theta_min must be positive, got {theta_min}")));
        }
        if !(theta_max > theta_min) || !theta_max.is_finite() {
            return Err(Error::Domain(format!(
                "empty scale domain: theta_max {theta_max} <= theta_min {theta_min}"
            )));
        }
        Ok(Self { k, theta_min, theta_max })
    }

    pub fn shape(&self) -> f64 {
        self.k
    }

    pub fn scale_bounds(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }
}

impl ExpFamilyModel for GammaModel {
    type Param = f64;

    fn mle(&self, x: &[f64]) -> Result<f64> {
        gamma_mle(x, self.k)
    }

    fn log_likelihood(&self, x: &[f64], theta: f64) -> f64 {
        let k = self.k;
        let lg = log_gamma(k).expect("shape validated positive");
        // the carrier x^{k-1} is identically 1 for k = 1, including at x = 0
        let carrier = |xi: f64| if k == 1.0 { 0.0 } else { (k - 1.0) * xi.ln() };
        x.iter()
            .map(|&xi| carrier(xi) - lg - k * theta.ln() - xi / theta)
            .sum()
    }

    fn contains(&self, theta: f64) -> bool {
        self.theta_min <= theta && theta <= self.theta_max
    }

    fn log_normalizer(&self, n: usize) -> Result<LogValue> {
        gamma_log_normalizer(self.k, n, self.theta_min, self.theta_max)
    }
}

/// Scale MLE `Σx / (k n)` of a gamma sample with known shape `k`.
pub fn gamma_mle(x: &[f64], k: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("gamma MLE of an empty sample".into()));
    }
    if !(k > 0.0) {
        return Err(Error::Domain(format!("gamma shape must be positive, got {k}")));
    }
    if let Some(bad) = x.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("gamma data must be positive, got {bad}")));
    }
    Ok(x.iter().sum::<f64>() / (k * x.len() as f64))
}

/// `ln C = kn ln(kn) − ln Γ(kn) − kn + ln ln(θ_max/θ_min)`.
pub fn gamma_log_normalizer(k: f64, n: usize, theta_min: f64, theta_max: f64) -> Result<LogValue> {
    if !(k > 0.0) || n == 0 {
        return Err(Error::Domain(format!("need k > 0 and n >= 1, got k={k}, n={n}")));
    }
    if !(theta_min > 0.0) || !(theta_max > theta_min) {
        return Err(Error::Domain(format!(
            "empty scale domain [{theta_min}, {theta_max}]"
        )));
    }
    let kn = k * n as f64;
    Ok(kn * kn.ln() - log_gamma(kn)? - kn + (theta_max / theta_min).ln().ln())
}

/// Logistic family `θ e^{−x} / (1 + e^{−x})^{θ+1}` with `θ̂ <= R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticModel {
    r: f64,
}

impl LogisticModel {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("logistic bound R must be positive, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn bound(&self) -> f64 {
        self.r
    }
}

impl ExpFamilyModel for LogisticModel {
    type Param = f64;

    fn mle(&self, x: &[f64]) -> Result<f64> {
        logistic_mle(x)
    }

    fn log_likelihood(&self, x: &[f64], theta: f64) -> f64 {
        x.iter()
            .map(|&xi| theta.ln() - xi - (theta + 1.0) * softplus(-xi))
            .sum()
    }

    fn contains(&self, theta: f64) -> bool {
        theta <= self.r
    }

    fn log_normalizer(&self, n: usize) -> Result<LogValue> {
        logistic_log_normalizer(n, self.r)
    }
}

/// `θ̂ = n / Σ ln(1 + e^{−x_i})`.
pub fn logistic_mle(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("logistic MLE of an empty sample".into()));
    }
    let denom: f64 = x.iter().map(|&xi| softplus(-xi)).sum();
    if !(denom > 0.0) {
        return Err(Error::Domain("logistic MLE diverges: all data far in the right tail".into()));
    }
    Ok(x.len() as f64 / denom)
}

/// `ln C = (n−1) ln n − ln Γ(n) − n + 2 ln R`.
pub fn logistic_log_normalizer(n: usize, r: f64) -> Result<LogValue> {
    if n == 0 || !(r > 0.0) {
        return Err(Error::Domain(format!("need n >= 1 and R > 0, got n={n}, R={r}")));
    }
    let nf = n as f64;
    Ok((nf - 1.0) * nf.ln() - log_gamma(nf)? - nf + 2.0 * r.ln())
}
