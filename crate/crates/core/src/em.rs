//! Full-covariance Gaussian mixture EM with seeded restarts and hard
//! assignment by maximum responsibility.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{partition, Infeasibility, Partition};
use crate::error::{Error, Result};
use crate::gaussian::sorted_eigenvalues;
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Soft-count mass below which a component is considered collapsed.
const COLLAPSE_MASS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative observed log-likelihood improvement that counts as converged.
    pub tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    /// Eigenvalue floor for component covariances, as a multiple of
    /// `trace(Σ_global) / m`. Only used inside EM.
    pub reg_eps: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6, n_restarts: 100, seed: 0, reg_eps: 1e-6 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.n_restarts == 0 {
            return Err(Error::Config("max_iter and n_restarts must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.reg_eps > 0.0) || !self.reg_eps.is_finite() {
            return Err(Error::Config(format!("reg_eps must be positive, got {}", self.reg_eps)));
        }
        Ok(())
    }
}

/// Outcome of one EM run after hard assignment.
#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub k: usize,
    /// Labels in `1..=k`.
    pub z: Vec<usize>,
    /// Unregularized per-cluster MLEs of the hard assignment.
    pub partition: Partition,
    pub complete_log_likelihood: f64,
    /// Observed-data log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub restart: usize,
}

/// Why a restart was dropped.
#[derive(Debug, Clone, PartialEq)]
pub enum Discarded {
    /// A component's soft mass vanished during EM.
    Collapsed { component: usize, iteration: usize },
    /// The hard assignment has no finite likelihood.
    Infeasible(Infeasibility),
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub best: ClusteringResult,
    /// `(restart index, reason)` for every dropped restart.
    pub discarded: Vec<(usize, Discarded)>,
}

struct Component {
    log_weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_det: f64,
}

/// Row-major copy of the data plus the quantities shared by all restarts.
struct Prepared {
    rows: Vec<f64>,
    n: usize,
    m: usize,
    global_cov: DMatrix<f64>,
    reg_floor: f64,
    /// Row indices sorted lexicographically by value.
    canonical_order: Vec<usize>,
}

impl Prepared {
    fn new(data: &DMatrix<f64>, reg_eps: f64) -> Self {
        let (n, m) = data.shape();
        let mut rows: Vec<f64> = Vec::with_capacity(n * m);
        for i in 0..n {
            rows.extend(data.row(i).iter());
        }
        let nf = n as f64;
        let mean = DVector::from_iterator(m, data.column_iter().map(|c| c.sum() / nf));
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let global_cov = centered.tr_mul(&centered) / nf;
        let reg_floor = reg_eps * (global_cov.trace() / m as f64).max(f64::MIN_POSITIVE);
        let mut canonical_order: Vec<usize> = (0..n).collect();
        canonical_order.sort_by(|&a, &b| {
            rows[a * m..(a + 1) * m]
                .iter()
                .zip(&rows[b * m..(b + 1) * m])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self { rows, n, m, global_cov, reg_floor, canonical_order }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.m..(i + 1) * self.m]
    }

    fn component(&self, log_weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Component {
        let cov = self.stabilize(cov);
        let chol = Cholesky::new(cov.clone())
            .or_else(|| Cholesky::new(cov + DMatrix::identity(self.m, self.m) * self.reg_floor))
            .expect("eigenvalue floor makes the covariance positive definite");
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Component { log_weight, mean, chol, log_det }
    }

    /// Adds `reg_floor · I` when the smallest eigenvalue drops below the floor.
    fn stabilize(&self, cov: DMatrix<f64>) -> DMatrix<f64> {
        let sym = (&cov + cov.transpose()) * 0.5;
        let smallest = *sorted_eigenvalues(&sym).last().expect("m >= 1");
        if smallest < self.reg_floor {
            sym + DMatrix::identity(self.m, self.m) * self.reg_floor
        } else {
            sym
        }
    }
}

/// Log joint density `ln π_k + ln N(x; μ_k, Σ_k)` for every component.
fn log_joint(prep: &Prepared, comps: &[Component], x: &[f64], diff: &mut DVector<f64>, out: &mut [f64]) {
    let m = prep.m as f64;
    for (c, slot) in comps.iter().zip(out.iter_mut()) {
        for (d, (xi, mu)) in diff.iter_mut().zip(x.iter().zip(c.mean.iter())) {
            *d = xi - mu;
        }
        c.chol.l_dirty().solve_lower_triangular_mut(diff);
        let maha = diff.norm_squared();
        *slot = c.log_weight - 0.5 * (m * LN_2PI + c.log_det + maha);
    }
}

/// E-step: fills `resp` (n × K, row-major) and returns the observed log-likelihood.
fn e_step(prep: &Prepared, comps: &[Component], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let mut diff = DVector::zeros(prep.m);
    let mut total = 0.0;
    for i in 0..prep.n {
        let slot = &mut resp[i * k..(i + 1) * k];
        log_joint(prep, comps, prep.row(i), &mut diff, slot);
        let max = slot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = slot.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse;
        for v in slot.iter_mut() {
            *v = (*v - lse).exp();
        }
    }
    total
}

/// M-step. Returns the index of a collapsed component, if any.
fn m_step(prep: &Prepared, resp: &[f64], k: usize) -> std::result::Result<Vec<Component>, usize> {
    let m = prep.m;
    let mut mass = vec![0.0; k];
    let mut sums = vec![DVector::<f64>::zeros(m); k];
    for i in 0..prep.n {
        let x = prep.row(i);
        for c in 0..k {
            let w = resp[i * k + c];
            mass[c] += w;
            for (s, xi) in sums[c].iter_mut().zip(x) {
                *s += w * xi;
            }
        }
    }
    if let Some(c) = mass.iter().position(|&w| w <= COLLAPSE_MASS) {
        return Err(c);
    }
    let means: Vec<DVector<f64>> = sums.into_iter().zip(&mass).map(|(s, w)| s / *w).collect();
    let mut covs = vec![DMatrix::<f64>::zeros(m, m); k];
    let mut diff = vec![0.0; m];
    for i in 0..prep.n {
        let x = prep.row(i);
        for c in 0..k {
            let w = resp[i * k + c];
            for (d, (xi, mu)) in diff.iter_mut().zip(x.iter().zip(means[c].iter())) {
                *d = xi - mu;
            }
            let cov = &mut covs[c];
            for a in 0..m {
                let wa = w * diff[a];
                for b in 0..=a {
                    cov[(a, b)] += wa * diff[b];
                }
            }
        }
    }
    let n = prep.n as f64;
    Ok(covs
        .into_iter()
        .zip(means)
        .zip(&mass)
        .map(|((mut cov, mean), &w)| {
            for a in 0..m {
                for b in 0..a {
                    cov[(b, a)] = cov[(a, b)];
                }
            }
            prep.component((w / n).ln(), mean, cov / w)
        })
        .collect())
}

fn hard_labels(resp: &[f64], n: usize, k: usize) -> Vec<usize> {
    (0..n)
        .map(|i| {
            let row = &resp[i * k..(i + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best + 1
        })
        .collect()
}

fn run_restart(
    prep: &Prepared,
    data: &DMatrix<f64>,
    k: usize,
    config: &EmConfig,
    restart: usize,
) -> std::result::Result<ClusteringResult, Discarded> {
    let mut rng = rng::stream(&[config.seed, k as u64, restart as u64]);
    let picks = index::sample(&mut rng, prep.n, k);
    let log_w = -(k as f64).ln();
    let mut comps: Vec<Component> = picks
        .iter()
        .map(|p| {
            let row = prep.canonical_order[p];
            prep.component(log_w, DVector::from_column_slice(prep.row(row)), prep.global_cov.clone())
        })
        .collect();

    let mut resp = vec![0.0; prep.n * k];
    let mut trace = Vec::with_capacity(config.max_iter + 1);
    let mut converged = false;
    let mut iterations = 0;
    trace.push(e_step(prep, &comps, &mut resp));
    while iterations < config.max_iter {
        comps = m_step(prep, &resp, k).map_err(|component| Discarded::Collapsed { component, iteration: iterations })?;
        iterations += 1;
        let ll = e_step(prep, &comps, &mut resp);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(ll);
        if ll - prev <= config.tol * prev.abs() {
            converged = true;
            break;
        }
    }

    let z = hard_labels(&resp, prep.n, k);
    let part = match partition(data, &z, k, prep.m + 1) {
        Ok(Ok(part)) => part,
        Ok(Err(why)) => return Err(Discarded::Infeasible(why)),
        Err(e) => unreachable!("labels are produced in range: {e}"),
    };
    Ok(ClusteringResult {
        k,
        complete_log_likelihood: part.complete_log_likelihood(),
        z,
        partition: part,
        log_likelihood_trace: trace,
        n_iter: iterations,
        converged,
        restart,
    })
}

/// Runs a single seeded restart. Restart `r` of `(seed, K)` always uses the
/// same random stream.
pub fn em_restart(
    data: &DMatrix<f64>,
    k: usize,
    config: &EmConfig,
    restart: usize,
) -> Result<std::result::Result<ClusteringResult, Discarded>> {
    check_feasible(data, k)?;
    config.validate()?;
    let prep = Prepared::new(data, config.reg_eps);
    Ok(run_restart(&prep, data, k, config, restart))
}

fn check_feasible(data: &DMatrix<f64>, k: usize) -> Result<()> {
    let (n, m) = data.shape();
    if k == 0 || m == 0 {
        return Err(Error::Input(format!("need K >= 1 and m >= 1, got K={k}, m={m}")));
    }
    if n < k * (m + 1) {
        return Err(Error::Infeasible(format!("n={n} < K(m+1) = {}", k * (m + 1))));
    }
    Ok(())
}

/// Runs `n_restarts` restarts and keeps the feasible one with the largest
/// complete-data log-likelihood (earliest restart on ties).
pub fn em_fit(data: &DMatrix<f64>, k: usize, config: &EmConfig) -> Result<EmFit> {
    check_feasible(data, k)?;
    config.validate()?;
    let prep = Prepared::new(data, config.reg_eps);
    let runs: Vec<_> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(&prep, data, k, config, r))
        .collect();

    let mut best: Option<ClusteringResult> = None;
    let mut discarded = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(res) => {
                let better = best
                    .as_ref()
                    .map_or(true, |b| res.complete_log_likelihood > b.complete_log_likelihood);
                if better {
                    best = Some(res);
                }
            }
            Err(why) => discarded.push((r, why)),
        }
    }
    match best {
        Some(best) => Ok(EmFit { best, discarded }),
        None => Err(Error::Infeasible(format!(
            "all {} restarts for K={k} were discarded",
            config.n_restarts
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::mvn_mle;

    fn cfg(restarts: usize) -> EmConfig {
        EmConfig { n_restarts: restarts, seed: 11, ..EmConfig::default() }
    }

    #[test]
    fn single_component_is_the_mle() {
        let data = DMatrix::from_row_slice(5, 2, &[0.0, 1.0, 2.0, 0.5, 1.0, 3.0, -1.0, 2.0, 0.3, -0.7]);
        let fit = em_fit(&data, 1, &cfg(3)).unwrap();
        assert!(fit.best.z.iter().all(|&l| l == 1));
        let mle = mvn_mle(&data).unwrap();
        assert_eq!(fit.best.partition.clusters[0], mle);
    }

    #[test]
    fn too_little_data_is_infeasible() {
        let data = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(matches!(em_fit(&data, 2, &cfg(2)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let data = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let bad = EmConfig { tol: 1.5, ..cfg(1) };
        assert!(matches!(em_fit(&data, 1, &bad), Err(Error::Config(_))));
    }
}
