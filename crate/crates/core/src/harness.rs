//! Synthetic mixture experiments: true-model generation, sampling, the
//! identification-probability and benefit metrics, and the sweep drivers
//! that tabulate them against sample size and hyperparameter ratio.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{ComplexityTable, HyperParams, JConvention, JExponent, JThreshold};
use crate::criteria::{BicVariant, Criterion};
use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::gaussian::DomainParams;
use crate::rng;
use crate::selection::{argmin_first, fit_candidates, Scorer, ScoringSettings};

/// Eigenvalue range of generated component covariances.
pub const COVARIANCE_EIGEN_RANGE: (f64, f64) = (0.5, 2.0);

const MAX_REJECTIONS: usize = 100_000;

/// Marker written in place of a sample size that never reached the target.
pub const NEVER: &str = "never";

/// A Gaussian mixture used to generate data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl TrueModel {
    pub fn new(weights: Vec<f64>, means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::Input("weights, means and covariances must have one entry per component".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("weights must be positive and sum to 1: {weights:?}")));
        }
        let m = means[0].len();
        for (mean, cov) in means.iter().zip(&covariances) {
            if mean.len() != m || cov.shape() != (m, m) {
                return Err(Error::Input("component dimensions disagree".into()));
            }
            if (cov - cov.transpose()).amax() > 1e-12 * cov.amax() || Cholesky::new(cov.clone()).is_none() {
                return Err(Error::Input("component covariance is not symmetric positive definite".into()));
            }
        }
        Ok(Self { weights, means, covariances })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
fn random_rotation(m: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column signs so the draw is uniform over rotations
    let mut q = q;
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Side of the hypercube from which means are drawn when none is given.
pub fn default_box_side(m: usize, k: usize, separation: f64) -> f64 {
    2.0 * separation * COVARIANCE_EIGEN_RANGE.1.sqrt() * (k as f64).powf(1.0 / m as f64)
}

/// Equal-weight mixture with means in `[0, side]^m` at pairwise distance at
/// least `separation · √λ_max` (λ_max = upper eigenvalue bound) and random
/// covariances with eigenvalues in [`COVARIANCE_EIGEN_RANGE`].
pub fn generate_true_model_with(m: usize, k: usize, separation: f64, box_side: Option<f64>, seed: u64) -> Result<TrueModel> {
    if m == 0 || k == 0 {
        return Err(Error::Config(format!("need m >= 1 and K >= 1, got m={m}, K={k}")));
    }
    if !(separation > 0.0) {
        return Err(Error::Config(format!("separation must be positive, got {separation}")));
    }
    let side = box_side.unwrap_or_else(|| default_box_side(m, k, separation));
    if !(side > 0.0) {
        return Err(Error::Config(format!("box side must be positive, got {side}")));
    }
    let mut rng = rng::stream(&[seed]);
    let (lo, hi) = COVARIANCE_EIGEN_RANGE;
    let min_dist = separation * hi.sqrt();

    let mut means: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while means.len() < k {
        attempts += 1;
        if attempts > MAX_REJECTIONS {
            return Err(Error::Config(format!(
                "could not place {k} means {min_dist} apart in a box of side {side}"
            )));
        }
        let candidate = DVector::from_fn(m, |_, _| rng.random_range(0.0..side));
        if means.iter().all(|mu| (mu - &candidate).norm() >= min_dist) {
            means.push(candidate);
        }
    }
    let covariances = (0..k)
        .map(|_| {
            let q = random_rotation(m, &mut rng);
            let eig = DVector::from_fn(m, |_, _| rng.random_range(lo..=hi));
            let cov = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            (&cov + cov.transpose()) * 0.5
        })
        .collect();
    TrueModel::new(vec![1.0 / k as f64; k], means, covariances)
}

pub fn generate_true_model(m: usize, k: usize, separation: f64, seed: u64) -> Result<TrueModel> {
    generate_true_model_with(m, k, separation, None, seed)
}

/// Draws `n` points and their component labels (`1..=K`).
pub fn generate_gmm_data(model: &TrueModel, n: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Input("sample size must be at least 1".into()));
    }
    let m = model.dim();
    let chol: Vec<DMatrix<f64>> = model
        .covariances
        .iter()
        .map(|c| Cholesky::new(c.clone()).map(|ch| ch.l()).ok_or_else(|| Error::Input("covariance not SPD".into())))
        .collect::<Result<_>>()?;
    let pick = WeightedIndex::new(&model.weights).map_err(|e| Error::Input(e.to_string()))?;
    let mut rng = rng::stream(&[seed]);
    let mut data = DMatrix::zeros(n, m);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let c = pick.sample(&mut rng);
        let eps = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let x = &model.means[c] + &chol[c] * eps;
        data.row_mut(i).copy_from(&x.transpose());
        z.push(c + 1);
    }
    Ok((data, z))
}

/// `max{0, 1 − |K* − K|/T}`.
pub fn benefit(k_star: usize, k_true: usize, t: f64) -> f64 {
    (1.0 - k_star.abs_diff(k_true) as f64 / t).max(0.0)
}

/// One dataset scored by every criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub m: usize,
    pub k_true: usize,
    pub n: usize,
    pub trial: usize,
    /// Chosen `K` per criterion, in config order.
    pub chosen: Vec<usize>,
    pub benefit: Vec<f64>,
    /// `(RNML K*, NML K*)` per entry of the θ list; empty outside the θ cell.
    pub theta_chosen: Vec<(usize, usize)>,
}

/// Fraction of trials whose chosen `K` equals `k_true` under `criterion`.
pub fn identification_probability(results: &[TrialResult], criteria: &[Criterion], k_true: usize, criterion: Criterion) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Input("no trial results".into()));
    }
    let ci = criteria
        .iter()
        .position(|&c| c == criterion)
        .ok_or_else(|| Error::Input(format!("{criterion} was not scored")))?;
    let hits = results.iter().filter(|r| r.chosen[ci] == k_true).count();
    Ok(hits as f64 / results.len() as f64)
}

fn default_m_list() -> Vec<usize> {
    vec![1, 2, 5]
}
fn default_k_true_list() -> Vec<usize> {
    vec![2, 3]
}
fn default_n_list() -> Vec<usize> {
    (1..=10).map(|i| 100 * i).collect()
}
fn default_trials() -> usize {
    30
}
fn default_restarts() -> usize {
    20
}
fn default_k_min() -> usize {
    1
}
fn default_criteria() -> Vec<Criterion> {
    Criterion::ALL.to_vec()
}
fn default_nml_theta() -> f64 {
    1e4
}
fn default_benefit_t() -> f64 {
    2.0
}
fn default_target() -> f64 {
    0.8
}
fn default_separation() -> f64 {
    6.0
}
fn default_theta_list() -> Vec<f64> {
    vec![1e2, 1e4, 1e6, 1e8]
}
fn default_max_iter() -> usize {
    EmConfig::default().max_iter
}
fn default_tol() -> f64 {
    EmConfig::default().tol
}
fn default_reg_eps() -> f64 {
    EmConfig::default().reg_eps
}

/// Experiment grid. Every field except `master_seed` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub master_seed: u64,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "default_k_true_list")]
    pub k_true_list: Vec<usize>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Candidate `K` run from `k_min` to `k_max` (default `K_true + 3`).
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub gamma: HyperParams,
    /// NML domain as `R = θ`, `λ_min = θ^(-1/m)`, unless `nml_r` and
    /// `nml_lambda_min` are both given.
    #[serde(default = "default_nml_theta")]
    pub nml_theta: f64,
    #[serde(default)]
    pub nml_r: Option<f64>,
    #[serde(default)]
    pub nml_lambda_min: Option<f64>,
    #[serde(default = "default_benefit_t")]
    pub benefit_t: f64,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub box_side: Option<f64>,
    #[serde(default = "default_theta_list")]
    pub theta_list: Vec<f64>,
    /// Cell used for the θ sweep; defaults to the first `m` and `K_true`.
    #[serde(default)]
    pub theta_m: Option<usize>,
    #[serde(default)]
    pub theta_k_true: Option<usize>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_reg_eps")]
    pub reg_eps: f64,
    #[serde(default)]
    pub threshold: JThreshold,
    #[serde(default)]
    pub j_exponent: JExponent,
    #[serde(default)]
    pub bic_variant: BicVariant,
}

impl SweepConfig {
    /// Defaults everywhere, with the given seed.
    pub fn with_seed(master_seed: u64) -> Self {
        toml::from_str(&format!("master_seed = {master_seed}")).expect("defaults deserialize")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config whose seed comes from elsewhere. A `master_seed` in the
    /// text must agree with `seed`.
    pub fn from_toml_str_with_seed(text: &str, seed: u64) -> Result<Self> {
        let seed_value = i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} exceeds 2^63 - 1")))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        match table.get("master_seed") {
            None => {
                table.insert("master_seed".into(), toml::Value::Integer(seed_value));
            }
            Some(v) if v.as_integer().map(|i| i as u64) == Some(seed) => {}
            Some(v) => return Err(Error::Config(format!("config sets master_seed = {v} but the seed given is {seed}"))),
        }
        let config: Self = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("sweep config serializes")
    }

    pub fn j_convention(&self) -> JConvention {
        JConvention::new(self.threshold, self.j_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m_list.is_empty() || self.k_true_list.is_empty() || self.n_list.is_empty() || self.criteria.is_empty() {
            return fail("m_list, k_true_list, n_list and criteria must be nonempty".into());
        }
        if self.m_list.contains(&0) || self.k_true_list.contains(&0) || self.n_list.contains(&0) {
            return fail("m, K_true and n values must be positive".into());
        }
        if self.trials == 0 || self.restarts == 0 || self.k_min == 0 {
            return fail("trials, restarts and k_min must be positive".into());
        }
        for &k in &self.k_true_list {
            if self.k_max_for(k) < self.k_min {
                return fail(format!("empty K range [{}, {}]", self.k_min, self.k_max_for(k)));
            }
        }
        if !(self.benefit_t > 0.0) {
            return fail(format!("benefit T must be positive, got {}", self.benefit_t));
        }
        if !(self.separation > 0.0) {
            return fail(format!("separation must be positive, got {}", self.separation));
        }
        if self.nml_r.is_some() != self.nml_lambda_min.is_some() {
            return fail("nml_r and nml_lambda_min must be given together".into());
        }
        if self.theta_list.iter().any(|t| !(*t > 1.0)) {
            return fail("every θ must exceed 1".into());
        }
        self.gamma.validate()?;
        self.em_config().validate()?;
        for &m in &self.m_list {
            self.nml_params(m)?;
        }
        if let Some(m) = self.theta_m {
            if !self.m_list.contains(&m) {
                return fail(format!("theta_m = {m} is not in m_list"));
            }
        }
        if let Some(k) = self.theta_k_true {
            if !self.k_true_list.contains(&k) {
                return fail(format!("theta_k_true = {k} is not in k_true_list"));
            }
        }
        Ok(())
    }

    pub fn k_max_for(&self, k_true: usize) -> usize {
        self.k_max.unwrap_or(k_true + 3)
    }

    pub fn nml_params(&self, m: usize) -> Result<DomainParams> {
        match (self.nml_r, self.nml_lambda_min) {
            (Some(r), Some(l)) => DomainParams::isotropic(r, l, m),
            _ => DomainParams::from_theta(self.nml_theta, m),
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig { max_iter: self.max_iter, tol: self.tol, n_restarts: self.restarts, seed: 0, reg_eps: self.reg_eps }
    }

    pub fn theta_cell(&self) -> (usize, usize) {
        (self.theta_m.unwrap_or(self.m_list[0]), self.theta_k_true.unwrap_or(self.k_true_list[0]))
    }

    fn sorted_n(&self) -> Vec<usize> {
        let mut ns = self.n_list.clone();
        ns.sort_unstable();
        ns.dedup();
        ns
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub m: usize,
    pub k_true: usize,
    pub n: usize,
    pub criterion: Criterion,
    pub accuracy: f64,
    pub mean_benefit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastNRow {
    pub m: usize,
    pub k_true: usize,
    pub criterion: Criterion,
    pub least_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRow {
    pub theta: f64,
    pub criterion: Criterion,
    pub least_n: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTables {
    pub trials: Vec<TrialResult>,
    pub accuracy: Vec<AccuracyRow>,
    pub least_n: Vec<LeastNRow>,
    pub theta: Vec<ThetaRow>,
}

fn fmt_least(n: Option<usize>) -> String {
    n.map_or_else(|| NEVER.to_string(), |n| n.to_string())
}

impl SweepTables {
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("m,K_true,n,criterion,accuracy,mean_benefit\n");
        for r in &self.accuracy {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.m, r.k_true, r.n, r.criterion, r.accuracy, r.mean_benefit);
        }
        out
    }

    pub fn least_n_csv(&self) -> String {
        let mut out = String::from("m,K_true,criterion,least_n\n");
        for r in &self.least_n {
            let _ = writeln!(out, "{},{},{},{}", r.m, r.k_true, r.criterion, fmt_least(r.least_n));
        }
        out
    }

    pub fn theta_csv(&self) -> String {
        let mut out = String::from("theta,criterion,least_n\n");
        for r in &self.theta {
            let _ = writeln!(out, "{},{},{}", r.theta, r.criterion, fmt_least(r.least_n));
        }
        out
    }

    pub fn accuracy_at(&self, m: usize, k_true: usize, n: usize, criterion: Criterion) -> Option<&AccuracyRow> {
        self.accuracy.iter().find(|r| r.m == m && r.k_true == k_true && r.n == n && r.criterion == criterion)
    }

    pub fn least_n_for(&self, m: usize, k_true: usize, criterion: Criterion) -> Option<Option<usize>> {
        self.least_n.iter().find(|r| r.m == m && r.k_true == k_true && r.criterion == criterion).map(|r| r.least_n)
    }
}

const TAG_MODEL: u64 = 1;
const TAG_DATA: u64 = 2;
const TAG_EM: u64 = 3;

#[derive(Debug, Clone, Copy)]
struct Unit {
    m: usize,
    k_true: usize,
    n: usize,
    trial: usize,
    with_theta: bool,
}

fn run_unit(
    config: &SweepConfig,
    unit: Unit,
    model: &TrueModel,
    scorer: &Scorer,
    criteria: &[Criterion],
) -> Result<TrialResult> {
    let Unit { m, k_true, n, trial, with_theta } = unit;
    let ids = [config.master_seed, m as u64, k_true as u64, n as u64, trial as u64];
    let (data, _) = generate_gmm_data(model, n, rng::derive_seed(&[&[TAG_DATA][..], &ids].concat()))?;
    let em = EmConfig { seed: rng::derive_seed(&[&[TAG_EM][..], &ids].concat()), ..config.em_config() };
    let k_max = config.k_max_for(k_true);

    let candidates = match fit_candidates(&data, config.k_min..=k_max, &em) {
        Ok(c) => c,
        // too few points for even the smallest K: every criterion falls back to k_min
        Err(Error::Infeasible(_)) => (config.k_min..=k_max).map(|k| (k, None, em.n_restarts)).collect(),
        Err(e) => return Err(e),
    };
    let pick = |score: &dyn Fn(&crate::em::ClusteringResult) -> Result<f64>| -> Result<usize> {
        let scores = candidates
            .iter()
            .map(|(_, r, _)| r.as_ref().map_or(Ok(f64::INFINITY), |r| score(r)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(candidates[argmin_first(&scores).expect("nonempty K range")].0)
    };

    let chosen = criteria.iter().map(|&c| pick(&|r| scorer.score(c, r))).collect::<Result<Vec<_>>>()?;
    let benefits = chosen.iter().map(|&k| benefit(k, k_true, config.benefit_t)).collect();
    let theta_chosen = if with_theta {
        config
            .theta_list
            .iter()
            .map(|&theta| {
                let gamma = HyperParams::from_ratio(theta)?;
                let params = DomainParams::from_theta(theta, m)?;
                Ok((
                    pick(&|r| scorer.score_with(Criterion::Rnml, r, &gamma, None))?,
                    pick(&|r| scorer.score_with(Criterion::Nml, r, &gamma, Some(&params)))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(TrialResult { m, k_true, n, trial, chosen, benefit: benefits, theta_chosen })
}

fn least_n_where(ns: &[usize], mut passes: impl FnMut(usize) -> bool) -> Option<usize> {
    ns.iter().copied().find(|&n| passes(n))
}

fn execute(config: &SweepConfig, cells: &[(usize, usize)], theta_cell: Option<(usize, usize)>, criteria: &[Criterion]) -> Result<SweepTables> {
    config.validate()?;
    let ns = config.sorted_n();

    let mut models = HashMap::new();
    for &(m, k) in cells {
        let seed = rng::derive_seed(&[TAG_MODEL, config.master_seed, m as u64, k as u64]);
        models.insert((m, k), generate_true_model_with(m, k, config.separation, config.box_side, seed)?);
    }

    // one complexity table per (m, n, K_max), shared by all trials of that size
    let mut table_keys: Vec<(usize, usize, usize)> =
        cells.iter().flat_map(|&(m, k)| ns.iter().map(move |&n| (m, n, config.k_max_for(k)))).collect();
    table_keys.sort_unstable();
    table_keys.dedup();
    let tables: Vec<Arc<ComplexityTable>> = table_keys
        .par_iter()
        .map(|&(m, n, k_max)| ComplexityTable::build(n, k_max, m, config.j_convention()).map(Arc::new))
        .collect::<Result<_>>()?;
    let mut scorers = HashMap::new();
    for (key, table) in table_keys.iter().zip(tables) {
        let settings = ScoringSettings {
            gamma: config.gamma,
            nml_params: Some(config.nml_params(key.0)?),
            j: config.j_convention(),
            bic_variant: config.bic_variant,
        };
        scorers.insert(*key, Scorer::with_table(table, settings)?);
    }

    let units: Vec<Unit> = cells
        .iter()
        .flat_map(|&(m, k_true)| {
            let ns = &ns;
            (0..ns.len()).flat_map(move |ni| {
                (0..config.trials).map(move |trial| Unit {
                    m,
                    k_true,
                    n: ns[ni],
                    trial,
                    with_theta: theta_cell == Some((m, k_true)),
                })
            })
        })
        .collect();
    let trials: Vec<TrialResult> = units
        .par_iter()
        .map(|&u| run_unit(config, u, &models[&(u.m, u.k_true)], &scorers[&(u.m, u.n, config.k_max_for(u.k_true))], criteria))
        .collect::<Result<_>>()?;

    let mut tables = SweepTables::default();
    let group = |m: usize, k: usize, n: usize| trials.iter().filter(move |t| t.m == m && t.k_true == k && t.n == n);
    for &(m, k_true) in cells {
        for (ci, &criterion) in criteria.iter().enumerate() {
            let mut benefit_by_n = Vec::with_capacity(ns.len());
            for &n in &ns {
                let cell: Vec<&TrialResult> = group(m, k_true, n).collect();
                let count = cell.len() as f64;
                let accuracy = cell.iter().filter(|t| t.chosen[ci] == k_true).count() as f64 / count;
                let mean_benefit = cell.iter().map(|t| t.benefit[ci]).sum::<f64>() / count;
                tables.accuracy.push(AccuracyRow { m, k_true, n, criterion, accuracy, mean_benefit });
                benefit_by_n.push(mean_benefit);
            }
            let least_n = least_n_where(&ns, |n| benefit_by_n[ns.iter().position(|&x| x == n).unwrap()] > config.target);
            tables.least_n.push(LeastNRow { m, k_true, criterion, least_n });
        }
    }
    if let Some((m, k_true)) = theta_cell {
        for (ti, &theta) in config.theta_list.iter().enumerate() {
            for (slot, criterion) in [Criterion::Rnml, Criterion::Nml].into_iter().enumerate() {
                let least_n = least_n_where(&ns, |n| {
                    let cell: Vec<&TrialResult> = group(m, k_true, n).collect();
                    let total: f64 = cell
                        .iter()
                        .map(|t| {
                            let pair = t.theta_chosen[ti];
                            benefit(if slot == 0 { pair.0 } else { pair.1 }, k_true, config.benefit_t)
                        })
                        .sum();
                    total / cell.len() as f64 > config.target
                });
                tables.theta.push(ThetaRow { theta, criterion, least_n });
            }
        }
    }
    tables.trials = trials;
    Ok(tables)
}

/// Full sweep over every `(m, K_true)` cell, plus the θ sweep on the θ cell
/// when `theta_list` is nonempty.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTables> {
    let cells: Vec<(usize, usize)> =
        config.m_list.iter().flat_map(|&m| config.k_true_list.iter().map(move |&k| (m, k))).collect();
    let theta_cell = (!config.theta_list.is_empty()).then(|| config.theta_cell());
    execute(config, &cells, theta_cell, &config.criteria)
}

/// Only the θ-dependency sweep, on the θ cell. The fits and data match those
/// of [`run_sweep`] for the same config.
pub fn run_theta_sweep(config: &SweepConfig) -> Result<SweepTables> {
    if config.theta_list.is_empty() {
        return Err(Error::Config("theta_list is empty".into()));
    }
    let cell = config.theta_cell();
    execute(config, &[cell], Some(cell), &config.criteria)
}
