// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wild bootstrap of the self-normalized statistics and test assembly.
//!
//! Replicate `b` multiplies the centered observations by i.i.d. standard
//! normal draws from a stream keyed by `(seed, b)`, so the replicate set does
//! not depend on the number of worker threads.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_sim::{FunctionalKind, QuantileTable};
use crate::quantile::{order_statistic, sort_extended};
use crate::rng;
use crate::series::{PrefixSums, TimeSeries};
use crate::statistics::{
    changepoint_estimate, cusum_statistic, default_bandwidth, extended_real, q_statistic_with,
    r_statistic, EstimateResult, ExtendedStatistic, QMethod,
};

/// Full-scale default number of bootstrap replications.
pub const DEFAULT_REPLICATIONS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Sup-type self-normalized statistic.
    Q,
    /// Integral-type self-normalized statistic.
    R,
    /// Bartlett-normalized CUSUM.
    Cusum,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Q => "q",
            StatisticKind::R => "r",
            StatisticKind::Cusum => "cusum",
        }
    }

    /// Limit functional whose quantiles calibrate this statistic.
    pub fn limit_functional(self) -> FunctionalKind {
        match self {
            StatisticKind::Q => FunctionalKind::S,
            StatisticKind::R => FunctionalKind::T,
            StatisticKind::Cusum => FunctionalKind::BridgeSup,
        }
    }

    /// Evaluates a self-normalized statistic; `None` for [`StatisticKind::Cusum`].
    pub fn evaluate(self, ps: &PrefixSums, q_method: QMethod) -> Option<ExtendedStatistic> {
        match self {
            StatisticKind::Q => Some(q_statistic_with(ps, q_method)),
            StatisticKind::R => Some(r_statistic(ps)),
            StatisticKind::Cusum => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    pub statistic: StatisticKind,
    pub alpha: f64,
    #[serde(default)]
    pub q_method: QMethod,
}

impl BootstrapConfig {
    pub fn new(statistic: StatisticKind, replications: usize, alpha: f64, seed: u64) -> Self {
        Self {
            replications,
            seed,
            statistic,
            alpha,
            q_method: QMethod::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::invalid("bootstrap needs at least one replication"));
        }
        validate_alpha(self.alpha)?;
        if self.statistic == StatisticKind::Cusum {
            return Err(Error::invalid(
                "the wild bootstrap is defined for the q and r statistics only",
            ));
        }
        Ok(())
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    /// Replicate statistics in ascending order.
    pub replicates: Vec<f64>,
    pub observed: ExtendedStatistic,
    pub config: BootstrapConfig,
}

/// Runs the wild bootstrap for `cfg.statistic`.
pub fn wild_replicates(series: &TimeSeries, cfg: &BootstrapConfig) -> Result<BootstrapDistribution> {
    cfg.validate()?;
    let ps = series.prefix_sums();
    let observed = cfg
        .statistic
        .evaluate(&ps, cfg.q_method)
        .expect("validated kind");
    let replicates = if series.is_constant() {
        vec![0.0; cfg.replications]
    } else {
        let mean = series.mean();
        let resid: Vec<f64> = series.values().iter().map(|&v| v - mean).collect();
        let mut reps: Vec<f64> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|b| replicate(&resid, cfg, b))
            .collect();
        sort_extended(&mut reps);
        reps
    };
    Ok(BootstrapDistribution {
        replicates,
        observed,
        config: *cfg,
    })
}

fn replicate(resid: &[f64], cfg: &BootstrapConfig, b: u64) -> f64 {
    let mut rng = rng::stream(cfg.seed, &[b]);
    let starred: Vec<f64> = resid
        .iter()
        .map(|&r| {
            let x: f64 = StandardNormal.sample(&mut rng);
            r * x
        })
        .collect();
    let series = TimeSeries::new(starred).expect("finite residuals times finite draws");
    cfg.statistic
        .evaluate(&series.prefix_sums(), cfg.q_method)
        .expect("validated kind")
        .value
}

/// `⌈(1-alpha)·B⌉`-th order statistic of the replicates.
pub fn critical_value(dist: &BootstrapDistribution, alpha: f64) -> f64 {
    order_statistic(&dist.replicates, 1.0 - alpha)
}

/// `(1 + #{b : replicate_b >= observed}) / (B + 1)`.
pub fn p_value(dist: &BootstrapDistribution) -> f64 {
    let observed = dist.observed.value;
    // Replicates are sorted: count the suffix at or above `observed`.
    let below = dist.replicates.partition_point(|&r| r < observed);
    let at_or_above = dist.replicates.len() - below;
    (1 + at_or_above) as f64 / (dist.replicates.len() + 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalValueMethod {
    Asymptotic,
    Bootstrap,
}

/// Outcome of one changepoint test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: StatisticKind,
    pub observed: ExtendedStatistic,
    pub method: CriticalValueMethod,
    #[serde(with = "extended_real")]
    pub critical_value: f64,
    /// Bootstrap p-value; `None` for asymptotic critical values, where only
    /// tabulated quantiles are available.
    pub p_value: Option<f64>,
    pub reject: bool,
    pub alpha: f64,
    /// Changepoint estimate, present when the null is rejected.
    pub estimate: Option<EstimateResult>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    /// Bartlett bandwidth of the CUSUM statistic.
    pub bandwidth: Option<usize>,
}

impl TestReport {
    pub fn tau_hat(&self) -> Option<usize> {
        self.estimate.map(|e| e.tau_hat)
    }
}

/// How critical values are obtained.
#[derive(Clone, Debug)]
pub enum TestMode<'a> {
    Bootstrap(BootstrapConfig),
    Asymptotic {
        statistic: StatisticKind,
        alpha: f64,
        table: &'a QuantileTable,
        /// CUSUM bandwidth; defaults to `floor(n/10)`.
        bandwidth: Option<usize>,
    },
}

pub fn run_test(series: &TimeSeries, mode: &TestMode<'_>) -> Result<TestReport> {
    match mode {
        TestMode::Bootstrap(cfg) => {
            let dist = wild_replicates(series, cfg)?;
            let critical = critical_value(&dist, cfg.alpha);
            let reject = dist.observed.value > critical;
            Ok(TestReport {
                statistic: cfg.statistic,
                observed: dist.observed,
                method: CriticalValueMethod::Bootstrap,
                critical_value: critical,
                p_value: Some(p_value(&dist)),
                reject,
                alpha: cfg.alpha,
                estimate: reject.then(|| changepoint_estimate(&series.prefix_sums())),
                seed: Some(cfg.seed),
                replications: Some(cfg.replications),
                bandwidth: None,
            })
        }
        TestMode::Asymptotic {
            statistic,
            alpha,
            table,
            bandwidth,
        } => {
            validate_alpha(*alpha)?;
            let expected = statistic.limit_functional();
            if table.functional != expected {
                return Err(Error::invalid(format!(
                    "statistic {} needs a {} quantile table, got {}",
                    statistic.name(),
                    expected.name(),
                    table.functional.name()
                )));
            }
            let critical = table.quantile_at(1.0 - alpha)?;
            let ps = series.prefix_sums();
            let (observed, bandwidth) = match statistic {
                StatisticKind::Cusum => {
                    let m = bandwidth.unwrap_or_else(|| default_bandwidth(series.len()));
                    let value = cusum_statistic(series, m)?;
                    (
                        ExtendedStatistic {
                            value,
                            degenerate: false,
                        },
                        Some(m),
                    )
                }
                kind => (kind.evaluate(&ps, QMethod::Auto).expect("q or r"), None),
            };
            let reject = observed.value > critical;
            Ok(TestReport {
                statistic: *statistic,
                observed,
                method: CriticalValueMethod::Asymptotic,
                critical_value: critical,
                p_value: None,
                reject,
                alpha: *alpha,
                estimate: reject.then(|| changepoint_estimate(&ps)),
                seed: Some(table.seed),
                replications: None,
                bandwidth,
            })
        }
    }
}
