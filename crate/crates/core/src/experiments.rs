// SPDX-License-Identifier: MIT OR Apache-2.0

//! Size, power and estimator studies over grids of simulated data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::validate_alpha;
use crate::dgp::{generate, DgpSpec, ErrorModel, Innovation};
use crate::error::{Error, Result};
use crate::limit_sim::{VarianceProfile, DEFAULT_GRID, DEFAULT_RUNS};
use crate::methods::{ChangeTest, MethodOutcome, MethodRegistry, MethodSetup};
use crate::rng::{derive_key, label_key};
use crate::statistics::{changepoint_estimate, QMethod};

pub const DESK_REPETITIONS: usize = 1000;
pub const DESK_REPLICATIONS: usize = 500;
pub const DESK_TABLE_RUNS: usize = 20_000;
pub const FULL_REPETITIONS: usize = 5000;
pub const FULL_REPLICATIONS: usize = 2000;

const BOOTSTRAP_STREAM: u64 = 1;

fn default_alphas() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}

fn default_methods() -> Vec<String> {
    ["q_asymptotic", "r_asymptotic", "q_bootstrap", "r_bootstrap", "cusum"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_table_m() -> usize {
    DEFAULT_GRID
}

fn default_table_runs() -> usize {
    DESK_TABLE_RUNS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cells: Vec<DgpSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    pub repetitions: usize,
    /// Bootstrap replications `B`.
    pub replications: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Fixed CUSUM bandwidth; `None` uses `floor(n/10)`.
    #[serde(default)]
    pub bandwidth: Option<usize>,
    /// Profile of the asymptotic quantile tables.
    #[serde(default = "constant_profile")]
    pub eta: VarianceProfile,
    #[serde(default = "default_table_m")]
    pub table_m: usize,
    #[serde(default = "default_table_runs")]
    pub table_runs: usize,
}

fn constant_profile() -> VarianceProfile {
    VarianceProfile::Constant
}

impl ExperimentConfig {
    /// Desk-scale study: 1000 repetitions, `B = 500`.
    pub fn desk(cells: Vec<DgpSpec>) -> Self {
        Self {
            cells,
            methods: default_methods(),
            repetitions: DESK_REPETITIONS,
            replications: DESK_REPLICATIONS,
            alphas: default_alphas(),
            seed: 0,
            bandwidth: None,
            eta: VarianceProfile::Constant,
            table_m: DEFAULT_GRID,
            table_runs: DESK_TABLE_RUNS,
        }
    }

    /// Full-scale study: 5000 repetitions, `B = 2000`.
    pub fn full(cells: Vec<DgpSpec>) -> Self {
        Self {
            repetitions: FULL_REPETITIONS,
            replications: FULL_REPLICATIONS,
            table_runs: DEFAULT_RUNS,
            ..Self::desk(cells)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("at least one alpha is required".into()));
        }
        for &a in &self.alphas {
            validate_alpha(a)?;
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        let registry = MethodRegistry::default();
        for m in &self.methods {
            if !registry.contains(m) {
                return Err(Error::UnknownName {
                    what: "method",
                    name: m.clone(),
                    available: registry.names().join(", "),
                });
            }
        }
        for cell in &self.cells {
            cell.validate()?;
        }
        Ok(())
    }

    pub fn method_setup(&self) -> MethodSetup {
        MethodSetup {
            alphas: self.alphas.clone(),
            replications: self.replications,
            profile: self.eta.clone(),
            table_m: self.table_m,
            table_runs: self.table_runs,
            table_seed: derive_key(self.seed, &[label_key("quantile-tables")]),
            bandwidth: self.bandwidth,
            q_method: QMethod::Auto,
        }
    }

    pub fn build_methods(&self, registry: &MethodRegistry) -> Result<Vec<Box<dyn ChangeTest>>> {
        let setup = self.method_setup();
        self.methods.iter().map(|m| registry.build(m, &setup)).collect()
    }
}

/// The simulation grid: every error model and innovation law, `n` in `ns`,
/// the null and `δ ∈ {0.5, 1}` at `τ ∈ {n/4, n/2}`.
pub fn standard_cells(ns: &[usize]) -> Vec<DgpSpec> {
    let mut cells = Vec::new();
    for &n in ns {
        for errors in [
            ErrorModel::iid(),
            ErrorModel::ar1(),
            ErrorModel::ar1_ar1(),
            ErrorModel::arch1_inc(),
        ] {
            for innovations in [Innovation::Normal, Innovation::StudentT3] {
                let null = DgpSpec::null(n, errors, innovations);
                cells.push(null);
                for delta in [0.5, 1.0] {
                    for tau in [n / 4, n / 2] {
                        cells.push(null.with_change(delta, tau));
                    }
                }
            }
        }
    }
    cells
}

/// Parses a cell identifier such as `iid_null_n400` or `ar1_t3_d1_tau50_n100`.
pub fn parse_cell_id(id: &str) -> Result<DgpSpec> {
    let bad = || Error::Config(format!("malformed cell id {id:?}"));
    let (rest, n) = id.rsplit_once("_n").ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    let (rest, change) = if let Some(rest) = rest.strip_suffix("_null") {
        (rest, None)
    } else {
        let (rest, tau) = rest.rsplit_once("_tau").ok_or_else(bad)?;
        let tau: usize = tau.parse().map_err(|_| bad())?;
        let (rest, delta) = rest.rsplit_once("_d").ok_or_else(bad)?;
        let delta: f64 = delta.parse().map_err(|_| bad())?;
        (rest, Some((delta, tau)))
    };
    let (model, innovations) = match rest.strip_suffix("_t3") {
        Some(model) => (model, Innovation::StudentT3),
        None => (rest, Innovation::Normal),
    };
    let mut spec = DgpSpec::null(n, ErrorModel::from_tag(model)?, innovations);
    if let Some((delta, tau)) = change {
        spec = spec.with_change(delta, tau);
    }
    spec.validate()?;
    Ok(spec)
}

/// Data seed of repetition `rep` in `cell`.
pub fn repetition_seed(master: u64, cell: &DgpSpec, rep: usize) -> u64 {
    derive_key(master, &[label_key(&cell.cell_id()), rep as u64])
}

/// Per-repetition outcomes of every method on one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcomes {
    pub cell: DgpSpec,
    pub methods: Vec<String>,
    pub alphas: Vec<f64>,
    /// `outcomes[method][rep]`.
    pub outcomes: Vec<Vec<MethodOutcome>>,
    /// Repetitions whose series was constant.
    pub degenerate: usize,
}

impl CellOutcomes {
    pub fn scores(&self, method: &str) -> Result<Vec<f64>> {
        let i = self.method_index(method)?;
        Ok(self.outcomes[i].iter().map(|o| o.score).collect())
    }

    fn method_index(&self, method: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m == method)
            .ok_or_else(|| Error::UnknownName {
                what: "method",
                name: method.to_string(),
                available: self.methods.join(", "),
            })
    }
}

/// Runs every method on `repetitions` simulated series of `cell`.
pub fn simulate_cell(
    cell: &DgpSpec,
    methods: &[Box<dyn ChangeTest>],
    repetitions: usize,
    master: u64,
) -> Result<CellOutcomes> {
    cell.validate()?;
    let alphas = methods.first().map(|m| m.alphas().to_vec()).unwrap_or_default();
    let per_rep: Vec<(bool, Vec<MethodOutcome>)> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = repetition_seed(master, cell, rep);
            let series = generate(cell, seed)?;
            let boot_seed = derive_key(seed, &[BOOTSTRAP_STREAM]);
            let outs = methods
                .iter()
                .map(|m| m.apply(&series, boot_seed))
                .collect::<Result<Vec<_>>>()?;
            Ok((series.is_constant(), outs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut outcomes: Vec<Vec<MethodOutcome>> = vec![Vec::with_capacity(repetitions); methods.len()];
    let mut degenerate = 0;
    for (flat, outs) in per_rep {
        degenerate += usize::from(flat);
        for (i, o) in outs.into_iter().enumerate() {
            outcomes[i].push(o);
        }
    }
    Ok(CellOutcomes {
        cell: *cell,
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
        alphas,
        outcomes,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub cell: String,
    pub method: String,
    pub alpha: f64,
    pub rejections: usize,
    pub repetitions: usize,
    pub frequency: f64,
    /// `sqrt(p(1-p)/reps)`.
    pub stderr: f64,
    /// Repetitions whose series was constant.
    pub degenerate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn from_outcomes(cells: &[CellOutcomes]) -> Self {
        let mut rows = Vec::new();
        for cell in cells {
            let id = cell.cell.cell_id();
            for (method, outs) in cell.methods.iter().zip(&cell.outcomes) {
                let reps = outs.len();
                for (i, &alpha) in cell.alphas.iter().enumerate() {
                    let rejections = outs.iter().filter(|o| o.rejects[i]).count();
                    let p = rejections as f64 / reps as f64;
                    rows.push(RejectionRow {
                        cell: id.clone(),
                        method: method.clone(),
                        alpha,
                        rejections,
                        repetitions: reps,
                        frequency: p,
                        stderr: (p * (1.0 - p) / reps as f64).sqrt(),
                        degenerate: cell.degenerate,
                    });
                }
            }
        }
        RejectionTable { rows }
    }

    pub fn frequency(&self, cell: &str, method: &str, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.cell == cell && r.method == method && (r.alpha - alpha).abs() < 1e-12)
            .map(|r| r.frequency)
    }

    /// Distinct `(cell, method)` pairs in table order.
    pub fn groups(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(c, m)| *c == r.cell && *m == r.method) {
                out.push((r.cell.clone(), r.method.clone()));
            }
        }
        out
    }

    /// `{cell-id}_{method}.csv`.
    pub fn file_name(cell: &str, method: &str) -> String {
        format!("{cell}_{method}.csv")
    }

    /// Rows of one `(cell, method)` pair.
    pub fn group_csv(&self, cell: &str, method: &str) -> String {
        let mut out = String::from("alpha,rejections,repetitions,frequency,stderr,degenerate\n");
        for r in self.rows.iter().filter(|r| r.cell == cell && r.method == method) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.alpha, r.rejections, r.repetitions, r.frequency, r.stderr, r.degenerate
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,method,alpha,rejections,repetitions,frequency,stderr,degenerate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.cell, r.method, r.alpha, r.rejections, r.repetitions, r.frequency, r.stderr, r.degenerate
            ));
        }
        out
    }
}

/// Outcomes of every configured cell, in configuration order.
pub fn run_cells(cfg: &ExperimentConfig, registry: &MethodRegistry) -> Result<Vec<CellOutcomes>> {
    cfg.validate()?;
    let methods = cfg.build_methods(registry)?;
    cfg.cells
        .iter()
        .map(|cell| simulate_cell(cell, &methods, cfg.repetitions, cfg.seed))
        .collect()
}

pub fn rejection_rates(cfg: &ExperimentConfig) -> Result<RejectionTable> {
    let cells = run_cells(cfg, &MethodRegistry::default())?;
    Ok(RejectionTable::from_outcomes(&cells))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub size: f64,
    pub power: f64,
}

/// Empirical size against empirical power for every threshold taken from
/// the null scores, rejecting when a score exceeds the threshold. Starts at
/// `(0, 0)` and ends at `(1, 1)`.
pub fn roc_curve(null_scores: &[f64], alt_scores: &[f64]) -> Result<Vec<CurvePoint>> {
    if null_scores.is_empty() || alt_scores.is_empty() {
        return Err(Error::invalid("size-power curves need non-empty samples"));
    }
    let mut null = null_scores.to_vec();
    let mut alt = alt_scores.to_vec();
    null.sort_by(f64::total_cmp);
    alt.sort_by(f64::total_cmp);
    let above = |sorted: &[f64], c: f64| {
        (sorted.len() - sorted.partition_point(|&s| s <= c)) as f64 / sorted.len() as f64
    };
    let mut thresholds = vec![f64::INFINITY];
    for &c in null.iter().rev() {
        if thresholds.last() != Some(&c) {
            thresholds.push(c);
        }
    }
    thresholds.push(f64::NEG_INFINITY);
    Ok(thresholds
        .into_iter()
        .map(|c| CurvePoint {
            threshold: c,
            size: if c == f64::NEG_INFINITY { 1.0 } else { above(&null, c) },
            power: if c == f64::NEG_INFINITY { 1.0 } else { above(&alt, c) },
        })
        .collect())
}

/// Size-adjusted power of `method` on a null cell against an alternative
/// cell of the same model.
pub fn adjusted_size_power(
    cells: &[CellOutcomes],
    null_cell: &str,
    alt_cell: &str,
    method: &str,
) -> Result<Vec<CurvePoint>> {
    let find = |id: &str| {
        cells
            .iter()
            .find(|c| c.cell.cell_id() == id)
            .ok_or_else(|| Error::Config(format!("cell {id} was not simulated")))
    };
    let (null, alt) = (find(null_cell)?, find(alt_cell)?);
    let (a, b) = (&null.cell, &alt.cell);
    if !a.is_null() || b.is_null() || a.n != b.n || a.errors != b.errors || a.innovations != b.innovations {
        return Err(Error::Config(format!(
            "cells {null_cell} and {alt_cell} are not a null/alternative pair of one model"
        )));
    }
    roc_curve(&null.scores(method)?, &alt.scores(method)?)
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,size,power\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.size, p.power));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSample {
    pub cell: String,
    /// `τ̂/n` per repetition.
    pub tau_ratio: Vec<f64>,
}

/// `τ̂/n` over the repetitions of every configured alternative cell.
pub fn estimator_distribution(cfg: &ExperimentConfig) -> Result<Vec<EstimatorSample>> {
    if cfg.repetitions < 1 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    cfg.cells
        .iter()
        .map(|cell| {
            cell.validate()?;
            if cell.is_null() {
                return Err(Error::Config(format!(
                    "estimator distributions need alternative cells, got {}",
                    cell.cell_id()
                )));
            }
            let tau_ratio = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let series = generate(cell, repetition_seed(cfg.seed, cell, rep))?;
                    let tau = changepoint_estimate(&series.prefix_sums()).tau_hat;
                    Ok(tau as f64 / cell.n as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(EstimatorSample {
                cell: cell.cell_id(),
                tau_ratio,
            })
        })
        .collect()
}

pub fn estimator_csv(samples: &[EstimatorSample]) -> String {
    let mut out = String::from("cell,rep,tau_ratio\n");
    for s in samples {
        for (rep, r) in s.tau_ratio.iter().enumerate() {
            out.push_str(&format!("{},{rep},{r}\n", s.cell));
        }
    }
    out
}

pub const EXTREME_N: usize = 200;

/// Suffix of the asymptotic methods calibrated with the true variance profile.
pub const TRUE_ETA_SUFFIX: &str = "_true_eta";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeScenarioConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub table_m: usize,
    pub table_runs: usize,
    pub errors: ErrorModel,
}

impl ExtremeScenarioConfig {
    pub fn desk(seed: u64, repetitions: usize) -> Self {
        Self {
            seed,
            repetitions,
            replications: DESK_REPLICATIONS,
            alphas: default_alphas(),
            table_m: DEFAULT_GRID,
            table_runs: DESK_TABLE_RUNS,
            errors: ErrorModel::ar1_extreme(),
        }
    }
}

/// AR(1) errors with the first quarter multiplied by 10, `n = 200`, null and
/// `δ = 1` at `τ = n/2`. Asymptotic methods use `η(t) = t` (misspecified) and
/// the true profile (`*_true_eta`); bootstrap methods need no profile.
pub fn extreme_hetero_scenario(cfg: &ExtremeScenarioConfig) -> Result<RejectionTable> {
    let null = DgpSpec::null(EXTREME_N, cfg.errors, Innovation::Normal);
    let cells = [null, null.with_change(1.0, EXTREME_N / 2)];
    let registry = MethodRegistry::default();
    let setup = MethodSetup {
        alphas: cfg.alphas.clone(),
        replications: cfg.replications,
        profile: VarianceProfile::Constant,
        table_m: cfg.table_m,
        table_runs: cfg.table_runs,
        table_seed: derive_key(cfg.seed, &[label_key("quantile-tables")]),
        bandwidth: None,
        q_method: QMethod::Auto,
    };
    let true_setup = MethodSetup {
        profile: crate::dgp::theoretical_eta(&null)?,
        ..setup.clone()
    };
    let mut methods = Vec::new();
    for name in ["q_asymptotic", "r_asymptotic", "q_bootstrap", "r_bootstrap"] {
        methods.push(registry.build(name, &setup)?);
    }
    for name in ["q_asymptotic", "r_asymptotic"] {
        methods.push(registry.build(name, &true_setup).map(|m| rename(m, name))?);
    }
    let outcomes = cells
        .iter()
        .map(|cell| simulate_cell(cell, &methods, cfg.repetitions, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(RejectionTable::from_outcomes(&outcomes))
}

struct Renamed {
    inner: Box<dyn ChangeTest>,
    name: String,
}

impl ChangeTest for Renamed {
    fn name(&self) -> &str {
        &self.name
    }
    fn statistic(&self) -> crate::bootstrap::StatisticKind {
        self.inner.statistic()
    }
    fn calibration(&self) -> crate::bootstrap::CriticalValueMethod {
        self.inner.calibration()
    }
    fn alphas(&self) -> &[f64] {
        self.inner.alphas()
    }
    fn apply(&self, series: &crate::series::TimeSeries, seed: u64) -> Result<MethodOutcome> {
        self.inner.apply(series, seed)
    }
}

fn rename(inner: Box<dyn ChangeTest>, base: &str) -> Box<dyn ChangeTest> {
    Box::new(Renamed {
        inner,
        name: format!("{base}{TRUE_ETA_SUFFIX}"),
    })
}
