//! Parametric-complexity terms of the renormalized (RNML) and plain NML
//! code-lengths of a Gaussian mixture under a hard cluster assignment.
//!
//! The RNML code-length of data `x` with labels `z` is
//!
//! ```text
//! −ln f(x, z; K, μ̂, Σ̂) + ln C1(K, n) + ln C2(K, n) + ln B(x, z) + K ln I(m, γ)
//! ```
//!
//! where `C1` is the multinomial complexity, `C2` its Gaussian-weighted
//! counterpart, `B` collects per-cluster mean/covariance factors and `I` the
//! hyperparameter normalizer. `C1` follows a three-term linear recursion in
//! `K`; `C2` a convolution over the size of the last cluster.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{log_c_gaussian_nml, mvn_mle, DomainParams, GaussianMle};
use crate::special::{log_add_exp, log_factorials, log_gamma, log_multivariate_gamma, log_sum_exp, xlogx, LogValue};
use crate::CodeLength;

/// Hyperparameters `γ = (λ1, λ2, R1, R2)` bounding the renormalization
/// region. Only the ratios `R2/R1` and `λ2/λ1` affect code-lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyperParams")]
pub struct HyperParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyperParams {
    lambda1: f64,
    lambda2: f64,
    r1: f64,
    r2: f64,
}

impl TryFrom<RawHyperParams> for HyperParams {
    type Error = Error;

    fn try_from(raw: RawHyperParams) -> Result<Self> {
        Self::new(raw.lambda1, raw.lambda2, raw.r1, raw.r2)
    }
}

/// Default ratio `R2/R1 = λ2/λ1`.
pub const DEFAULT_HYPER_RATIO: f64 = 1e4;

impl HyperParams {
    pub fn new(lambda1: f64, lambda2: f64, r1: f64, r2: f64) -> Result<Self> {
        let gamma = Self { lambda1, lambda2, r1, r2 };
        gamma.validate()?;
        Ok(gamma)
    }

    /// `R1 = λ1 = 1`, `R2 = λ2 = θ`.
    pub fn from_ratio(theta: f64) -> Result<Self> {
        Self::new(1.0, theta, 1.0, theta)
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.lambda1, self.lambda2, self.r1, self.r2]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(Error::Domain(format!("hyperparameters must be positive: {self:?}")));
        }
        if !(self.r2 / self.r1 > 1.0) || !(self.lambda2 / self.lambda1 > 1.0) {
            return Err(Error::Domain(format!(
                "need R2/R1 > 1 and λ2/λ1 > 1, got {} and {}",
                self.r2 / self.r1,
                self.lambda2 / self.lambda1
            )));
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::from_ratio(DEFAULT_HYPER_RATIO).expect("default ratio exceeds one")
    }
}

/// Smallest cluster size for which `J(h)` is counted as nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JThreshold {
    /// `h >= m + 1`: the smallest size with a nonsingular covariance.
    #[default]
    MPlusOne,
    /// `h >= m + 2`.
    MPlusTwo,
}

impl JThreshold {
    pub fn min_size(self, m: usize) -> usize {
        match self {
            JThreshold::MPlusOne => m + 1,
            JThreshold::MPlusTwo => m + 2,
        }
    }
}

/// Power of `h/2e` in `J(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JExponent {
    /// `m h / 2`, the exponent of the single-Gaussian normalizer, so that
    /// `C2(1, n) = J(n)` matches `C(R, λ_min)` up to the `I` factor.
    #[default]
    HalfMh,
    /// `m h`.
    Mh,
}

impl JExponent {
    fn scale(self, m: usize, h: usize) -> f64 {
        match self {
            JExponent::HalfMh => 0.5 * (m * h) as f64,
            JExponent::Mh => (m * h) as f64,
        }
    }
}

/// Which `J(h)` the complexity tables use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JConvention {
    pub threshold: JThreshold,
    pub exponent: JExponent,
}

impl JConvention {
    pub fn new(threshold: JThreshold, exponent: JExponent) -> Self {
        Self { threshold, exponent }
    }

    pub fn min_size(self, m: usize) -> usize {
        self.threshold.min_size(m)
    }
}

/// `ln I(m, γ) = (m+1) ln(m/2) + ln ln(R2/R1) + m ln ln(λ2/λ1)`.
pub fn log_i(m: usize, gamma: &HyperParams) -> Result<LogValue> {
    gamma.validate()?;
    let mf = m as f64;
    Ok((mf + 1.0) * (0.5 * mf).ln()
        + (gamma.r2 / gamma.r1).ln().ln()
        + mf * (gamma.lambda2 / gamma.lambda1).ln().ln())
}

/// `ln J(h) = (m h / 2) ln(h/2e) − ln Γ_m((h−1)/2)` for `h >= m + 1`, else `−∞`.
pub fn log_j(h: usize, m: usize) -> LogValue {
    log_j_with(h, m, JConvention::default())
}

pub fn log_j_with(h: usize, m: usize, conv: JConvention) -> LogValue {
    if m == 0 || h < conv.min_size(m) {
        return f64::NEG_INFINITY;
    }
    let hf = h as f64;
    conv.exponent.scale(m, h) * (hf / (2.0 * std::f64::consts::E)).ln()
        - log_multivariate_gamma(m, 0.5 * (hf - 1.0)).expect("h >= m+1 keeps the argument in range")
}

/// `ln C1(2, n) = ln Σ_h binom(n, h) (h/n)^h ((n−h)/n)^(n−h)`.
fn log_c1_two(n: usize, log_fact: &[f64]) -> LogValue {
    if n == 0 {
        return 0.0;
    }
    let ln_n = (n as f64).ln();
    let terms: Vec<f64> = (0..=n)
        .map(|h| {
            let rest = n - h;
            log_fact[n] - log_fact[h] - log_fact[rest] + xlogx(h as f64) + xlogx(rest as f64) - n as f64 * ln_n
        })
        .collect();
    log_sum_exp(&terms)
}

/// Runs `C1(K+2, n) = C1(K+1, n) + (n/K) C1(K, n)` from `C1(1, n) = 1` up to
/// `k_max`. Entry `K−1` holds `ln C1(K, n)`.
fn log_c1_column(k_max: usize, n: usize, log_fact: &[f64]) -> Vec<LogValue> {
    let mut out = Vec::with_capacity(k_max);
    out.push(0.0);
    if k_max >= 2 {
        out.push(log_c1_two(n, log_fact));
    }
    let ln_n = (n as f64).ln();
    for k in 3..=k_max {
        let lower = (k - 2) as f64;
        out.push(log_add_exp(out[k - 2], ln_n - lower.ln() + out[k - 3]));
    }
    out
}

/// `ln C1(K, n)`, computed in `O(n + K)`.
pub fn log_c1(k: usize, n: usize) -> Result<LogValue> {
    if k == 0 {
        return Err(Error::Domain("C1 needs K >= 1".into()));
    }
    let log_fact = log_factorials(n);
    Ok(log_c1_column(k, n, &log_fact)[k - 1])
}

/// `ln C2(K, n)` for dimension `m` under the default `J` convention.
pub fn log_c2(k: usize, n: usize, m: usize) -> Result<LogValue> {
    Ok(ComplexityTable::build(n, k, m, JConvention::default())?.log_c2(k, n))
}

/// `ln C1(K, r)` and `ln C2(K, r)` for every `K <= k_max` and `r <= n`.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityTable {
    n: usize,
    k_max: usize,
    m: usize,
    conv: JConvention,
    // [K-1][r]
    log_c1: Vec<Vec<LogValue>>,
    log_c2: Vec<Vec<LogValue>>,
}

impl ComplexityTable {
    /// Builds both tables; `C2` costs `O(n² K)` log-sum-exp terms.
    pub fn build(n: usize, k_max: usize, m: usize, conv: JConvention) -> Result<Self> {
        if k_max == 0 || m == 0 {
            return Err(Error::Domain(format!("need K >= 1 and m >= 1, got K={k_max}, m={m}")));
        }
        let log_fact = log_factorials(n);
        let xlx: Vec<f64> = (0..=n).map(|r| xlogx(r as f64)).collect();

        let by_r: Vec<Vec<f64>> = (0..=n).map(|r| log_c1_column(k_max, r, &log_fact)).collect();
        let log_c1 = (0..k_max).map(|k| by_r.iter().map(|col| col[k]).collect()).collect();

        let log_j: Vec<f64> = (0..=n).map(|h| log_j_with(h, m, conv)).collect();
        let mut log_c2: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        log_c2.push(log_j.clone());
        let mut terms = Vec::with_capacity(n + 1);
        for k in 1..k_max {
            let prev = &log_c2[k - 1];
            let next: Vec<f64> = (0..=n)
                .map(|r| {
                    terms.clear();
                    for r1 in 0..=r {
                        let r2 = r - r1;
                        if prev[r1] == f64::NEG_INFINITY || log_j[r2] == f64::NEG_INFINITY {
                            continue;
                        }
                        terms.push(
                            log_fact[r] - log_fact[r1] - log_fact[r2] + xlx[r1] + xlx[r2] - xlx[r]
                                + prev[r1]
                                + log_j[r2],
                        );
                    }
                    log_sum_exp(&terms)
                })
                .collect();
            log_c2.push(next);
        }
        Ok(Self { n, k_max, m, conv, log_c1, log_c2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn convention(&self) -> JConvention {
        self.conv
    }

    /// Panics if `k` or `r` exceed the table.
    pub fn log_c1(&self, k: usize, r: usize) -> LogValue {
        self.log_c1[k - 1][r]
    }

    pub fn log_c2(&self, k: usize, r: usize) -> LogValue {
        self.log_c2[k - 1][r]
    }

    /// Writes `K,r,logC1,logC2` rows. Infinite entries are written as `-inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "K,r,logC1,logC2")?;
        for k in 1..=self.k_max {
            for r in 0..=self.n {
                writeln!(out, "{k},{r},{},{}", self.log_c1(k, r), self.log_c2(k, r))?;
            }
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The dimension
    /// and `J` convention are not stored in the file; the `K = 1` row of `C2`
    /// is checked against `J(r)` to catch a mismatch.
    pub fn read_csv<R: Read>(input: R, m: usize, conv: JConvention) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!("expected 4 columns, got {}", record.len())));
            }
            let field = |i: usize| record[i].trim().to_string();
            let parse_usize = |s: String| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            let parse_f64 = |s: String| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            rows.push((parse_usize(field(0))?, parse_usize(field(1))?, parse_f64(field(2))?, parse_f64(field(3))?));
        }
        let k_max = rows.iter().map(|r| r.0).max().ok_or_else(|| Error::Parse("empty complexity table".into()))?;
        let n = rows.iter().map(|r| r.1).max().unwrap_or(0);
        if k_max == 0 || rows.len() != k_max * (n + 1) {
            return Err(Error::Parse(format!(
                "expected {} rows for K <= {k_max}, r <= {n}, got {}",
                k_max * (n + 1),
                rows.len()
            )));
        }
        let mut log_c1 = vec![vec![f64::NAN; n + 1]; k_max];
        let mut log_c2 = vec![vec![f64::NAN; n + 1]; k_max];
        for (k, r, c1, c2) in rows {
            if k == 0 || c1.is_nan() || c2.is_nan() {
                return Err(Error::Parse(format!("invalid row K={k}, r={r}")));
            }
            log_c1[k - 1][r] = c1;
            log_c2[k - 1][r] = c2;
        }
        if log_c1.iter().chain(&log_c2).flatten().any(|v| v.is_nan()) {
            return Err(Error::Parse("complexity table has missing (K, r) cells".into()));
        }
        for (r, &stored) in log_c2[0].iter().enumerate() {
            let expected = log_j_with(r, m, conv);
            let matches = stored == expected || (stored - expected).abs() <= 1e-9 * expected.abs().max(1.0);
            if !matches {
                return Err(Error::Parse(format!(
                    "table does not match m={m}: logC2(1,{r}) = {stored}, expected {expected}"
                )));
            }
        }
        Ok(Self { n, k_max, m, conv, log_c1, log_c2 })
    }
}

/// Per-cluster MLEs of a hard assignment, in label order.
#[derive(Debug, Clone)]
pub struct Partition {
    pub clusters: Vec<GaussianMle>,
    pub n: usize,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.n).collect()
    }

    /// `ln f(x, z; K, θ̂) = Σ_k h_k ln(h_k/n) − Σ_k [h_k/2 · ln((2π)^m |Σ̂_k|) + m h_k/2]`.
    pub fn complete_log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        self.clusters
            .iter()
            .map(|c| {
                let h = c.n as f64;
                h * (h / n).ln() - c.neg_log_likelihood()
            })
            .sum()
    }
}

/// Why an assignment has no finite code-length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Infeasibility {
    EmptyCluster(usize),
    Undersized { label: usize, size: usize, min: usize },
    Singular(usize),
}

/// Groups rows by label (`1..=k`) and fits each cluster.
///
/// `Ok(Err(_))` marks an infeasible assignment; `Err(_)` is malformed input.
pub fn partition(
    data: &DMatrix<f64>,
    z: &[usize],
    k: usize,
    min_size: usize,
) -> Result<std::result::Result<Partition, Infeasibility>> {
    let (n, _) = data.shape();
    if z.len() != n {
        return Err(Error::Input(format!("{} labels for {n} rows", z.len())));
    }
    if k == 0 {
        return Err(Error::Input("K must be at least 1".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in z.iter().enumerate() {
        if label == 0 || label > k {
            return Err(Error::Input(format!("label {label} at row {i} outside 1..={k}")));
        }
        members[label - 1].push(i);
    }
    let mut clusters = Vec::with_capacity(k);
    for (idx, rows) in members.iter().enumerate() {
        let label = idx + 1;
        if rows.is_empty() {
            return Ok(Err(Infeasibility::EmptyCluster(label)));
        }
        if rows.len() < min_size {
            return Ok(Err(Infeasibility::Undersized { label, size: rows.len(), min: min_size }));
        }
        match mvn_mle(&data.select_rows(rows)) {
            Ok(mle) => clusters.push(mle),
            Err(Error::Singular(_)) => return Ok(Err(Infeasibility::Singular(label))),
            Err(e) => return Err(e),
        }
    }
    Ok(Ok(Partition { clusters, n }))
}

fn log_b_of(partition: &Partition) -> Result<LogValue> {
    let m = partition.clusters[0].dim();
    let mf = m as f64;
    let constant = (mf + 1.0) * std::f64::consts::LN_2 - (mf + 1.0) * mf.ln() - log_gamma(0.5 * mf)?;
    partition
        .clusters
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let norm_sq = c.mean_norm_sq();
            if !(norm_sq > 0.0) {
                return Err(Error::DegenerateDomain(format!("cluster {} has zero mean", idx + 1)));
            }
            Ok(constant + 0.5 * mf * norm_sq.ln() - 0.5 * mf * c.log_det())
        })
        .sum()
}

fn infeasible_error(why: Infeasibility) -> Error {
    Error::Infeasible(format!("{why:?}"))
}

/// `ln B(x, z) = Σ_p [(m+1) ln 2 + m ln‖μ̂_p‖ − (m/2) ln|Σ̂_p| − (m+1) ln m − ln Γ(m/2)]`.
pub fn log_b(data: &DMatrix<f64>, z: &[usize], k: usize) -> Result<LogValue> {
    let m = data.ncols();
    let part = partition(data, z, k, JConvention::default().min_size(m))?.map_err(infeasible_error)?;
    log_b_of(&part)
}

/// The five RNML terms, kept apart for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnmlTerms {
    pub neg_log_likelihood: f64,
    pub log_c1: LogValue,
    pub log_c2: LogValue,
    pub log_b: LogValue,
    pub k_log_i: LogValue,
}

impl RnmlTerms {
    pub fn total(&self) -> CodeLength {
        self.neg_log_likelihood + self.log_c1 + self.log_c2 + self.log_b + self.k_log_i
    }
}

/// RNML terms of an assignment, or `Ok(None)` when it is infeasible.
pub fn rnml_terms(
    table: &ComplexityTable,
    data: &DMatrix<f64>,
    z: &[usize],
    k: usize,
    gamma: &HyperParams,
) -> Result<Option<RnmlTerms>> {
    let (n, m) = data.shape();
    check_table(table, n, k, m)?;
    match partition(data, z, k, table.convention().min_size(m))? {
        Ok(part) => rnml_terms_of(table, &part, gamma),
        Err(_) => Ok(None),
    }
}

fn check_table(table: &ComplexityTable, n: usize, k: usize, m: usize) -> Result<()> {
    if table.dim() != m || table.n() < n || table.k_max() < k {
        return Err(Error::Input(format!(
            "complexity table (n={}, K={}, m={}) does not cover n={n}, K={k}, m={m}",
            table.n(),
            table.k_max(),
            table.dim()
        )));
    }
    Ok(())
}

/// RNML terms from already-fitted clusters; `Ok(None)` if a cluster is below
/// the table's `J` convention.
pub fn rnml_terms_of(table: &ComplexityTable, part: &Partition, gamma: &HyperParams) -> Result<Option<RnmlTerms>> {
    let k = part.clusters.len();
    let m = part.clusters[0].dim();
    check_table(table, part.n, k, m)?;
    let min = table.convention().min_size(m);
    if part.clusters.iter().any(|c| c.n < min) {
        return Ok(None);
    }
    Ok(Some(RnmlTerms {
        neg_log_likelihood: -part.complete_log_likelihood(),
        log_c1: table.log_c1(k, part.n),
        log_c2: table.log_c2(k, part.n),
        log_b: log_b_of(part)?,
        k_log_i: k as f64 * log_i(m, gamma)?,
    }))
}

/// RNML code-length using a prebuilt table; `+∞` for infeasible assignments.
pub fn rnml_codelength_with_table(
    table: &ComplexityTable,
    data: &DMatrix<f64>,
    z: &[usize],
    k: usize,
    gamma: &HyperParams,
) -> Result<CodeLength> {
    Ok(rnml_terms(table, data, z, k, gamma)?.map_or(f64::INFINITY, |t| t.total()))
}

/// RNML code-length of a Gaussian mixture assignment.
pub fn rnml_codelength_gmm(data: &DMatrix<f64>, z: &[usize], k: usize, gamma: &HyperParams) -> Result<CodeLength> {
    let table = ComplexityTable::build(data.nrows(), k.max(1), data.ncols(), JConvention::default())?;
    rnml_codelength_with_table(&table, data, z, k, gamma)
}

/// Non-renormalized NML code-length: `−ln f + ln C1(K, n) + Σ_k ln C(R, λ_min; h_k)`.
///
/// `+∞` when any cluster is undersized, singular or outside `Y(R, λ_min)`.
pub fn nml_codelength_gmm(data: &DMatrix<f64>, z: &[usize], k: usize, params: &DomainParams) -> Result<CodeLength> {
    let (n, m) = data.shape();
    if params.dim() != m {
        return Err(Error::Input(format!("domain parameters for m={}, data has m={m}", params.dim())));
    }
    let part = match partition(data, z, k, m + 1)? {
        Ok(part) => part,
        Err(_) => return Ok(f64::INFINITY),
    };
    nml_codelength_of(&part, params, log_c1(k, n)?)
}

/// NML code-length from already-fitted clusters and a precomputed `ln C1(K, n)`.
pub fn nml_codelength_of(part: &Partition, params: &DomainParams, log_c1_kn: LogValue) -> Result<CodeLength> {
    if !part.clusters.iter().all(|c| params.contains(c)) {
        return Ok(f64::INFINITY);
    }
    let mut total = -part.complete_log_likelihood() + log_c1_kn;
    for c in &part.clusters {
        total += log_c_gaussian_nml(c.n, c.dim(), params)?;
    }
    Ok(total)
}
