// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named test procedures behind a common trait, selected at runtime.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    critical_value, p_value, validate_alpha, wild_replicates, BootstrapConfig,
    CriticalValueMethod, StatisticKind,
};
use crate::error::{Error, Result};
use crate::limit_sim::{simulate_quantiles, QuantileTable, VarianceProfile, DEFAULT_GRID};
use crate::series::TimeSeries;
use crate::statistics::{
    changepoint_estimate, cusum_statistic, default_bandwidth, ExtendedStatistic, QMethod,
};

/// Shared parameters from which every registered method is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSetup {
    /// Significance levels evaluated in one pass.
    pub alphas: Vec<f64>,
    /// Bootstrap replications `B`.
    pub replications: usize,
    /// Variance profile of the asymptotic quantile tables.
    pub profile: VarianceProfile,
    pub table_m: usize,
    pub table_runs: usize,
    pub table_seed: u64,
    /// Fixed CUSUM bandwidth; `None` uses `floor(n/10)`.
    pub bandwidth: Option<usize>,
    pub q_method: QMethod,
}

impl Default for MethodSetup {
    fn default() -> Self {
        Self {
            alphas: vec![0.01, 0.05, 0.10],
            replications: 500,
            profile: VarianceProfile::Constant,
            table_m: DEFAULT_GRID,
            table_runs: 20_000,
            table_seed: 0x5eed,
            bandwidth: None,
            q_method: QMethod::Auto,
        }
    }
}

impl MethodSetup {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::invalid("at least one alpha is required"));
        }
        for &a in &self.alphas {
            validate_alpha(a)?;
        }
        if self.replications < 1 {
            return Err(Error::invalid("bootstrap needs at least one replication"));
        }
        Ok(())
    }

    /// Strictly increasing `1 - alpha` levels.
    fn table_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = self.alphas.iter().map(|a| 1.0 - a).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        levels
    }
}

/// Result of one method on one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub observed: ExtendedStatistic,
    /// One critical value per configured alpha, in configuration order.
    pub critical_values: Vec<f64>,
    pub rejects: Vec<bool>,
    pub p_value: Option<f64>,
    /// Evidence against the null, comparable across series for one method:
    /// the statistic for asymptotic calibration, `1 - p` for the bootstrap.
    pub score: f64,
    pub tau_hat: usize,
}

pub trait ChangeTest: Send + Sync {
    fn name(&self) -> &str;
    fn statistic(&self) -> StatisticKind;
    fn calibration(&self) -> CriticalValueMethod;
    fn alphas(&self) -> &[f64];
    /// `seed` drives any resampling; asymptotic methods ignore it.
    fn apply(&self, series: &TimeSeries, seed: u64) -> Result<MethodOutcome>;
}

impl fmt::Debug for dyn ChangeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChangeTest").field("name", &self.name()).finish()
    }
}

pub type MethodFactory = fn(&str, &MethodSetup) -> Result<Box<dyn ChangeTest>>;

/// Wild-bootstrap calibrated self-normalized test.
pub struct BootstrapTest {
    name: String,
    statistic: StatisticKind,
    alphas: Vec<f64>,
    replications: usize,
    q_method: QMethod,
}

impl ChangeTest for BootstrapTest {
    fn name(&self) -> &str {
        &self.name
    }

    fn statistic(&self) -> StatisticKind {
        self.statistic
    }

    fn calibration(&self) -> CriticalValueMethod {
        CriticalValueMethod::Bootstrap
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn apply(&self, series: &TimeSeries, seed: u64) -> Result<MethodOutcome> {
        let mut cfg = BootstrapConfig::new(self.statistic, self.replications, self.alphas[0], seed);
        cfg.q_method = self.q_method;
        let dist = wild_replicates(series, &cfg)?;
        let critical_values: Vec<f64> = self.alphas.iter().map(|&a| critical_value(&dist, a)).collect();
        let rejects = critical_values.iter().map(|&c| dist.observed.value > c).collect();
        let p = p_value(&dist);
        Ok(MethodOutcome {
            observed: dist.observed,
            critical_values,
            rejects,
            p_value: Some(p),
            score: 1.0 - p,
            tau_hat: changepoint_estimate(&series.prefix_sums()).tau_hat,
        })
    }
}

/// Test calibrated by simulated limit quantiles.
pub struct AsymptoticTest {
    name: String,
    statistic: StatisticKind,
    alphas: Vec<f64>,
    table: QuantileTable,
    bandwidth: Option<usize>,
    q_method: QMethod,
}

impl AsymptoticTest {
    pub fn table(&self) -> &QuantileTable {
        &self.table
    }
}

impl ChangeTest for AsymptoticTest {
    fn name(&self) -> &str {
        &self.name
    }

    fn statistic(&self) -> StatisticKind {
        self.statistic
    }

    fn calibration(&self) -> CriticalValueMethod {
        CriticalValueMethod::Asymptotic
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn apply(&self, series: &TimeSeries, _seed: u64) -> Result<MethodOutcome> {
        let ps = series.prefix_sums();
        let observed = match self.statistic {
            StatisticKind::Cusum => {
                let m = self.bandwidth.unwrap_or_else(|| default_bandwidth(series.len()));
                match cusum_statistic(series, m) {
                    Ok(value) => ExtendedStatistic {
                        value,
                        degenerate: false,
                    },
                    Err(Error::Degenerate(_)) => ExtendedStatistic::zero_degenerate(),
                    Err(e) => return Err(e),
                }
            }
            kind => kind.evaluate(&ps, self.q_method).expect("q or r"),
        };
        let critical_values = self
            .alphas
            .iter()
            .map(|&a| self.table.quantile_at(1.0 - a))
            .collect::<Result<Vec<f64>>>()?;
        let rejects = critical_values.iter().map(|&c| observed.value > c).collect();
        Ok(MethodOutcome {
            observed,
            critical_values,
            rejects,
            p_value: None,
            score: observed.value,
            tau_hat: changepoint_estimate(&ps).tau_hat,
        })
    }
}

fn bootstrap_factory(statistic: StatisticKind) -> impl Fn(&str, &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    move |name, setup| {
        setup.validate()?;
        Ok(Box::new(BootstrapTest {
            name: name.to_string(),
            statistic,
            alphas: setup.alphas.clone(),
            replications: setup.replications,
            q_method: setup.q_method,
        }))
    }
}

fn asymptotic_factory(statistic: StatisticKind) -> impl Fn(&str, &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    move |name, setup| {
        setup.validate()?;
        let table = simulate_quantiles(
            statistic.limit_functional(),
            &setup.profile,
            setup.table_m,
            setup.table_runs,
            &setup.table_levels(),
            setup.table_seed,
        )?;
        Ok(Box::new(AsymptoticTest {
            name: name.to_string(),
            statistic,
            alphas: setup.alphas.clone(),
            table,
            bandwidth: setup.bandwidth,
            q_method: setup.q_method,
        }))
    }
}

fn q_asymptotic(name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    asymptotic_factory(StatisticKind::Q)(name, setup)
}

fn r_asymptotic(name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    asymptotic_factory(StatisticKind::R)(name, setup)
}

fn q_bootstrap(name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    bootstrap_factory(StatisticKind::Q)(name, setup)
}

fn r_bootstrap(name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    bootstrap_factory(StatisticKind::R)(name, setup)
}

fn cusum(name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
    asymptotic_factory(StatisticKind::Cusum)(name, setup)
}

/// Name-to-factory table of test procedures.
pub struct MethodRegistry {
    entries: Vec<(String, MethodFactory)>,
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register("q_asymptotic", q_asymptotic);
        registry.register("r_asymptotic", r_asymptotic);
        registry.register("q_bootstrap", q_bootstrap);
        registry.register("r_bootstrap", r_bootstrap);
        registry.register("cusum", cusum);
        registry
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Adds or replaces a method.
    pub fn register(&mut self, name: &str, factory: MethodFactory) {
        let key = normalize(name);
        match self.entries.iter_mut().find(|(n, _)| *n == key) {
            Some(entry) => entry.1 = factory,
            None => self.entries.push((key, factory)),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        let key = normalize(name);
        self.entries.iter().any(|(n, _)| *n == key)
    }

    pub fn build(&self, name: &str, setup: &MethodSetup) -> Result<Box<dyn ChangeTest>> {
        let key = normalize(name);
        let (name, factory) = self
            .entries
            .iter()
            .find(|(n, _)| *n == key)
            .ok_or_else(|| Error::UnknownName {
                what: "method",
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        factory(name, setup)
    }
}

fn normalize(name: &str) -> String {
    let key = name.trim().to_ascii_lowercase().replace('-', "_");
    // `cusum_m` names the bandwidth-dependent CUSUM.
    if key == "cusum_m" {
        "cusum".to_string()
    } else {
        key
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> MethodSetup {
        MethodSetup {
            replications: 99,
            table_m: 100,
            table_runs: 1000,
            ..MethodSetup::default()
        }
    }

    #[test]
    fn registry_lists_and_builds_every_method() {
        let registry = MethodRegistry::default();
        assert_eq!(
            registry.names(),
            vec!["q_asymptotic", "r_asymptotic", "q_bootstrap", "r_bootstrap", "cusum"]
        );
        let setup = small_setup();
        let step = TimeSeries::new((0..40).map(|i| if i < 20 { 0.0 } else { 5.0 } + (i % 3) as f64).collect())
            .unwrap();
        for name in registry.names() {
            let method = registry.build(name, &setup).unwrap();
            assert_eq!(method.name(), name);
            let out = method.apply(&step, 1).unwrap();
            assert_eq!(out.rejects.len(), 3);
            assert!(out.rejects.iter().all(|&r| r), "{name} should detect the step");
            assert_eq!(out.tau_hat, 20);
        }
    }

    #[test]
    fn unknown_and_aliased_names() {
        let registry = MethodRegistry::default();
        assert!(matches!(
            registry.build("nope", &small_setup()),
            Err(Error::UnknownName { .. })
        ));
        assert!(registry.contains("CUSUM_M"));
        assert!(registry.contains("Q-Bootstrap"));
    }

    #[test]
    fn constant_series_never_rejects() {
        let registry = MethodRegistry::default();
        let flat = TimeSeries::new(vec![2.5; 30]).unwrap();
        for name in registry.names() {
            let out = registry.build(name, &small_setup()).unwrap().apply(&flat, 3).unwrap();
            assert_eq!(out.observed.value, 0.0, "{name}");
            assert!(out.rejects.iter().all(|&r| !r), "{name}");
        }
    }

    #[test]
    fn registration_replaces_by_name() {
        let mut registry = MethodRegistry::empty();
        registry.register("x", q_bootstrap);
        registry.register("X", r_bootstrap);
        assert_eq!(registry.names(), vec!["x"]);
        let m = registry.build("x", &small_setup()).unwrap();
        assert_eq!(m.statistic(), StatisticKind::R);
        assert_eq!(m.calibration(), CriticalValueMethod::Bootstrap);
    }
}
