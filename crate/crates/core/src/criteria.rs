//! Cluster-count criteria scored on a hard assignment.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complexity::{partition, Partition};
use crate::error::{Error, Result};
use crate::CodeLength;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Criterion {
    Rnml,
    Nml,
    Aic,
    Bic,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Rnml, Criterion::Nml, Criterion::Aic, Criterion::Bic];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Rnml => "RNML",
            Criterion::Nml => "NML",
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RNML" => Ok(Criterion::Rnml),
            "NML" => Ok(Criterion::Nml),
            "AIC" => Ok(Criterion::Aic),
            "BIC" => Ok(Criterion::Bic),
            other => Err(Error::Input(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Which BIC penalty to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BicVariant {
    /// `(m(m+3)K/2) Σ_k ln h_k + K ln n`.
    #[default]
    Verbatim,
    /// `(m(m+3)/2) Σ_k ln h_k + (K−1) ln n`.
    Standard,
}

/// `m(m+3)K + K`.
pub fn aic_penalty(m: usize, k: usize) -> f64 {
    (m * (m + 3) * k + k) as f64
}

pub fn bic_penalty(m: usize, sizes: &[usize], n: usize, variant: BicVariant) -> f64 {
    let k = sizes.len() as f64;
    let per_cluster = (m * (m + 3)) as f64 / 2.0;
    let log_sizes: f64 = sizes.iter().map(|&h| (h as f64).ln()).sum();
    let ln_n = (n as f64).ln();
    match variant {
        BicVariant::Verbatim => per_cluster * k * log_sizes + k * ln_n,
        BicVariant::Standard => per_cluster * log_sizes + (k - 1.0) * ln_n,
    }
}

pub(crate) fn aic_of(part: &Partition) -> f64 {
    -2.0 * part.complete_log_likelihood() + aic_penalty(part.clusters[0].dim(), part.clusters.len())
}

pub(crate) fn bic_of(part: &Partition, variant: BicVariant) -> f64 {
    let m = part.clusters[0].dim();
    -2.0 * part.complete_log_likelihood() + bic_penalty(m, &part.sizes(), part.n, variant)
}

/// `−2 ln f(x, z; K, θ̂) + m(m+3)K + K`; `+∞` if any cluster is empty,
/// undersized or singular.
pub fn aic(data: &DMatrix<f64>, z: &[usize], k: usize) -> Result<CodeLength> {
    Ok(partition(data, z, k, data.ncols() + 1)?.map_or(f64::INFINITY, |p| aic_of(&p)))
}

pub fn bic(data: &DMatrix<f64>, z: &[usize], k: usize) -> Result<CodeLength> {
    bic_with(data, z, k, BicVariant::Verbatim)
}

pub fn bic_with(data: &DMatrix<f64>, z: &[usize], k: usize, variant: BicVariant) -> Result<CodeLength> {
    Ok(partition(data, z, k, data.ncols() + 1)?.map_or(f64::INFINITY, |p| bic_of(&p, variant)))
}
