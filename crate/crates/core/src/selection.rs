//! Choosing the number of clusters: fit every candidate `K` by EM, then
//! score the best restart under each requested criterion.

use std::io::Write;
use std::ops::RangeInclusive;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complexity::{nml_codelength_of, rnml_terms_of, ComplexityTable, HyperParams, JConvention};
use crate::criteria::{aic_of, bic_of, BicVariant, Criterion};
use crate::em::{em_fit, ClusteringResult, EmConfig};
use crate::error::{Error, Result};
use crate::gaussian::DomainParams;
use crate::CodeLength;

/// Everything besides the data that a criterion score depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSettings {
    pub gamma: HyperParams,
    /// Required when scoring NML.
    pub nml_params: Option<DomainParams>,
    pub j: JConvention,
    pub bic_variant: BicVariant,
}

impl ScoringSettings {
    pub fn new(gamma: HyperParams, nml_params: Option<DomainParams>) -> Self {
        Self { gamma, nml_params, j: JConvention::default(), bic_variant: BicVariant::default() }
    }
}

/// Scores clustering results of one dataset size.
#[derive(Debug, Clone)]
pub struct Scorer {
    settings: ScoringSettings,
    table: Arc<ComplexityTable>,
}

impl Scorer {
    pub fn new(n: usize, m: usize, k_max: usize, settings: ScoringSettings) -> Result<Self> {
        let table = ComplexityTable::build(n, k_max, m, settings.j)?;
        Ok(Self { settings, table: Arc::new(table) })
    }

    /// Reuses a table, e.g. across trials with the same `n`.
    pub fn with_table(table: Arc<ComplexityTable>, settings: ScoringSettings) -> Result<Self> {
        if table.convention() != settings.j {
            return Err(Error::Config("table J convention differs from scoring settings".into()));
        }
        Ok(Self { settings, table })
    }

    pub fn settings(&self) -> &ScoringSettings {
        &self.settings
    }

    /// Score of a clustering; `+∞` when the assignment lies outside the
    /// criterion's support (undersized cluster, zero cluster mean, MLE outside
    /// the NML domain).
    pub fn score(&self, criterion: Criterion, result: &ClusteringResult) -> Result<CodeLength> {
        self.score_with(criterion, result, &self.settings.gamma, self.settings.nml_params.as_ref())
    }

    /// Like [`score`](Self::score) but with other hyperparameters, for sweeps
    /// that rescore the same fits.
    pub fn score_with(
        &self,
        criterion: Criterion,
        result: &ClusteringResult,
        gamma: &HyperParams,
        nml_params: Option<&DomainParams>,
    ) -> Result<CodeLength> {
        let part = &result.partition;
        let outcome = match criterion {
            Criterion::Rnml => rnml_terms_of(&self.table, part, gamma).map(|t| t.map_or(f64::INFINITY, |t| t.total())),
            Criterion::Nml => {
                let params = nml_params.ok_or_else(|| Error::Config("NML needs domain parameters R, λ_min".into()))?;
                nml_codelength_of(part, params, self.table.log_c1(result.k, part.n))
            }
            Criterion::Aic => Ok(aic_of(part)),
            Criterion::Bic => Ok(bic_of(part, self.settings.bic_variant)),
        };
        match outcome {
            Err(Error::DegenerateDomain(_)) => Ok(f64::INFINITY),
            other => other,
        }
    }
}

/// Index of the smallest score, preferring the earliest on ties.
pub fn argmin_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KEntry {
    pub k: usize,
    /// `None` when every restart for this `K` was discarded.
    pub result: Option<ClusteringResult>,
    pub discarded_restarts: usize,
    /// One score per requested criterion, in request order.
    pub scores: Vec<CodeLength>,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub criteria: Vec<Criterion>,
    pub entries: Vec<KEntry>,
    /// Chosen `K` per criterion, in request order.
    pub chosen: Vec<usize>,
}

impl SelectionReport {
    pub fn chosen_k(&self, criterion: Criterion) -> Option<usize> {
        self.criteria.iter().position(|&c| c == criterion).map(|i| self.chosen[i])
    }

    pub fn score(&self, k: usize, criterion: Criterion) -> Option<CodeLength> {
        let ci = self.criteria.iter().position(|&c| c == criterion)?;
        self.entries.iter().find(|e| e.k == k).map(|e| e.scores[ci])
    }

    /// Writes `K,criterion,score,chosen`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "K,criterion,score,chosen")?;
        for entry in &self.entries {
            for (ci, criterion) in self.criteria.iter().enumerate() {
                let chosen = self.chosen[ci] == entry.k;
                writeln!(out, "{},{},{},{}", entry.k, criterion, entry.scores[ci], chosen)?;
            }
        }
        Ok(())
    }
}

/// Fits every `K` in the range and records the best restart of each.
pub fn fit_candidates(data: &DMatrix<f64>, k_range: RangeInclusive<usize>, config: &EmConfig) -> Result<Vec<(usize, Option<ClusteringResult>, usize)>> {
    config.validate()?;
    if k_range.is_empty() || *k_range.start() == 0 {
        return Err(Error::Input(format!("invalid K range {k_range:?}")));
    }
    let (n, m) = data.shape();
    let k_min = *k_range.start();
    if n < k_min * (m + 1) {
        return Err(Error::Infeasible(format!("n={n} is too small for K={k_min} in {m} dimensions")));
    }
    k_range
        .map(|k| match em_fit(data, k, config) {
            Ok(fit) => Ok((k, Some(fit.best), fit.discarded.len())),
            Err(Error::Infeasible(_)) => Ok((k, None, config.n_restarts)),
            Err(e) => Err(e),
        })
        .collect()
}

/// Scores already-fitted candidates and picks the minimizing `K` per criterion.
pub fn score_candidates(
    candidates: Vec<(usize, Option<ClusteringResult>, usize)>,
    criteria: &[Criterion],
    scorer: &Scorer,
) -> Result<SelectionReport> {
    let mut entries = Vec::with_capacity(candidates.len());
    for (k, result, discarded_restarts) in candidates {
        let scores = criteria
            .iter()
            .map(|&c| result.as_ref().map_or(Ok(f64::INFINITY), |r| scorer.score(c, r)))
            .collect::<Result<Vec<_>>>()?;
        entries.push(KEntry { k, result, discarded_restarts, scores });
    }
    let chosen = (0..criteria.len())
        .map(|ci| {
            let column: Vec<f64> = entries.iter().map(|e| e.scores[ci]).collect();
            entries[argmin_first(&column).expect("K range is nonempty")].k
        })
        .collect();
    Ok(SelectionReport { criteria: criteria.to_vec(), entries, chosen })
}

/// Runs EM for each `K` in `k_range` and selects `K` under every criterion.
pub fn select_k(
    data: &DMatrix<f64>,
    k_range: RangeInclusive<usize>,
    criteria: &[Criterion],
    config: &EmConfig,
    settings: &ScoringSettings,
) -> Result<SelectionReport> {
    if criteria.is_empty() {
        return Err(Error::Input("no criteria requested".into()));
    }
    if criteria.contains(&Criterion::Nml) {
        match &settings.nml_params {
            None => return Err(Error::Config("NML needs domain parameters R, λ_min".into())),
            Some(p) if p.dim() != data.ncols() => {
                return Err(Error::Input(format!("λ_min has {} entries for {} columns", p.dim(), data.ncols())))
            }
            Some(_) => {}
        }
    }
    let k_max = *k_range.end();
    let candidates = fit_candidates(data, k_range, config)?;
    let scorer = Scorer::new(data.nrows(), data.ncols(), k_max, settings.clone())?;
    score_candidates(candidates, criteria, &scorer)
}
