// SPDX-License-Identifier: MIT OR Apache-2.0

//! Self-normalized CUSUM tests for a single change in the mean of a series
//! with time-varying variance, with wild-bootstrap and simulated
//! limit-distribution critical values.

pub mod bootstrap;
pub mod dgp;
pub mod envelope;
pub mod error;
pub mod experiments;
pub mod limit_sim;
pub mod methods;
pub mod quantile;
pub mod rng;
pub mod series;
pub mod statistics;

pub use bootstrap::{
    run_test, wild_replicates, BootstrapConfig, BootstrapDistribution, CriticalValueMethod,
    StatisticKind, TestMode, TestReport,
};
pub use dgp::{generate, theoretical_eta, DgpSpec, ErrorModel, Innovation};
pub use error::{Error, Result};
pub use experiments::{rejection_rates, ExperimentConfig, RejectionTable};
pub use limit_sim::{
    eta_from_sigma, simulate_alternative_limit, simulate_quantiles, EtaGrid, FunctionalKind,
    QuantileTable, VarianceProfile,
};
pub use methods::{ChangeTest, MethodOutcome, MethodRegistry, MethodSetup};
pub use series::{PrefixSums, TimeSeries};
pub use statistics::{
    bartlett_lrv, changepoint_estimate, cusum_statistic, q_statistic, r_statistic, EstimateResult,
    ExtendedStatistic, QMethod,
};
