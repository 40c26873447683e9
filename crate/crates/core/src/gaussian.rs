//! Multivariate Gaussian MLE and the NML normalizer over the restricted data
//! domain `Y(R, λ_min) = { ‖μ̂‖² <= R, λ̂_j >= λ_min^(j) }`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{log_gamma, log_multivariate_gamma, LogValue};
use crate::CodeLength;

/// Relative eigenvalue floor below which a covariance is treated as singular.
pub const SINGULARITY_RTOL: f64 = 1e-12;

/// Maximum-likelihood estimates of a multivariate Gaussian (divisor `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMle {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Eigenvalues of `covariance`, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub n: usize,
}

impl GaussianMle {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln()).sum()
    }

    pub fn mean_norm_sq(&self) -> f64 {
        self.mean.norm_squared()
    }

    /// `−ln f(x; μ̂, Σ̂) = n/2 · ln((2π)^m |Σ̂|) + nm/2`.
    pub fn neg_log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        let m = self.dim() as f64;
        0.5 * n * (m * (2.0 * std::f64::consts::PI).ln() + self.log_det()) + 0.5 * n * m
    }
}

/// Fits mean and ML covariance to the rows of `data`.
pub fn mvn_mle(data: &DMatrix<f64>) -> Result<GaussianMle> {
    let (n, m) = data.shape();
    if m == 0 {
        return Err(Error::Input("data has no columns".into()));
    }
    if n <= m {
        return Err(Error::Singular(format!(
            "{n} points cannot give a full-rank {m}x{m} covariance"
        )));
    }
    let nf = n as f64;
    let mean = DVector::from_iterator(m, data.column_iter().map(|c| c.sum() / nf));
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut covariance = centered.tr_mul(&centered) / nf;
    // symmetrize away roundoff in the product
    covariance = (&covariance + covariance.transpose()) * 0.5;
    let eigenvalues = sorted_eigenvalues(&covariance);
    let largest = eigenvalues[0];
    let smallest = eigenvalues[m - 1];
    if !(largest > 0.0) || smallest <= SINGULARITY_RTOL * largest {
        return Err(Error::Singular(format!(
            "covariance eigenvalues span [{smallest:e}, {largest:e}]"
        )));
    }
    Ok(GaussianMle { mean, covariance, eigenvalues, n })
}

pub(crate) fn sorted_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Bounds `R` on `‖μ̂‖²` and `λ_min` on the ordered covariance eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomainParams")]
pub struct DomainParams {
    r: f64,
    lambda_min: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomainParams {
    r: f64,
    lambda_min: Vec<f64>,
}

impl TryFrom<RawDomainParams> for DomainParams {
    type Error = Error;

    fn try_from(raw: RawDomainParams) -> Result<Self> {
        Self::new(raw.r, raw.lambda_min)
    }
}

impl DomainParams {
    pub fn new(r: f64, lambda_min: Vec<f64>) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("R must be positive and finite, got {r}")));
        }
        if lambda_min.is_empty() {
            return Err(Error::Domain("lambda_min must have one entry per dimension".into()));
        }
        if let Some(bad) = lambda_min.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("lambda_min entries must be positive, got {bad}")));
        }
        Ok(Self { r, lambda_min })
    }

    /// The same eigenvalue floor in every one of `m` dimensions.
    pub fn isotropic(r: f64, lambda_min: f64, m: usize) -> Result<Self> {
        Self::new(r, vec![lambda_min; m])
    }

    /// `R = θ` and `λ_min^(j) = θ^(-1/m)`, so that `θ = R = (λ_min^(j))^(-m)`.
    pub fn from_theta(theta: f64, m: usize) -> Result<Self> {
        if !(theta > 0.0) || m == 0 {
            return Err(Error::Domain(format!("need theta > 0 and m >= 1, got {theta}, {m}")));
        }
        Self::isotropic(theta, theta.powf(-1.0 / m as f64), m)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn lambda_min(&self) -> &[f64] {
        &self.lambda_min
    }

    pub fn dim(&self) -> usize {
        self.lambda_min.len()
    }

    /// Membership of an MLE in `Y(R, λ_min)`.
    pub fn contains(&self, mle: &GaussianMle) -> bool {
        mle.dim() == self.dim()
            && mle.mean_norm_sq() <= self.r
            && mle.eigenvalues.iter().zip(&self.lambda_min).all(|(l, floor)| l >= floor)
    }
}

/// `ln C(R, λ_min)` for `n` points in `m` dimensions:
///
/// `(m+1) ln 2 + (m/2) ln R − (m/2) Σ ln λ_min^(j) − (m+1) ln m − ln Γ(m/2)
///  + (mn/2) ln(n/2e) − ln Γ_m((n−1)/2)`.
///
/// Needs `n >= m + 1` so that `Γ_m((n−1)/2)` is defined.
pub fn log_c_gaussian_nml(n: usize, m: usize, params: &DomainParams) -> Result<LogValue> {
    if params.dim() != m {
        return Err(Error::Input(format!(
            "lambda_min has {} entries for dimension {m}",
            params.dim()
        )));
    }
    if n < m + 1 {
        return Err(Error::Domain(format!("Gaussian NML normalizer needs n >= m+1, got n={n}, m={m}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let ln2 = std::f64::consts::LN_2;
    let log_lambda: f64 = params.lambda_min.iter().map(|l| l.ln()).sum();
    Ok((mf + 1.0) * ln2 + 0.5 * mf * params.r.ln() - 0.5 * mf * log_lambda
        - (mf + 1.0) * mf.ln()
        - log_gamma(0.5 * mf)?
        + 0.5 * mf * nf * (nf / (2.0 * std::f64::consts::E)).ln()
        - log_multivariate_gamma(m, 0.5 * (nf - 1.0))?)
}

/// `−ln f(x; μ̂, Σ̂) + ln C(R, λ_min)`, defined when the MLE lies in the domain.
pub fn nml_codelength_gaussian(data: &DMatrix<f64>, params: &DomainParams) -> Result<CodeLength> {
    let mle = mvn_mle(data)?;
    if !params.contains(&mle) {
        return Err(Error::OutOfDomain(format!(
            "‖μ̂‖² = {}, eigenvalues {:?} outside Y(R = {}, λ_min = {:?})",
            mle.mean_norm_sq(),
            mle.eigenvalues,
            params.r,
            params.lambda_min
        )));
    }
    Ok(mle.neg_log_likelihood() + log_c_gaussian_nml(mle.n, mle.dim(), params)?)
}

/// ML estimates of the domain parameters: `R̂ = ‖μ̂‖²`, `λ̂_min^(j) = λ̂_j`.
pub fn ml_domain_params(data: &DMatrix<f64>) -> Result<DomainParams> {
    let mle = mvn_mle(data)?;
    let r = mle.mean_norm_sq();
    if !(r > 0.0) {
        return Err(Error::DegenerateDomain("sample mean is the zero vector".into()));
    }
    DomainParams::new(r, mle.eigenvalues)
}
