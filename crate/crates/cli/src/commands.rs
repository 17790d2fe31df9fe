// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use selfnorm_cpd::bootstrap::{run_test, BootstrapConfig, StatisticKind, TestMode, DEFAULT_REPLICATIONS};
use selfnorm_cpd::dgp::{generate, series_to_csv, DgpSpec, ErrorModel, Innovation};
use selfnorm_cpd::experiments::{
    adjusted_size_power, curve_csv, estimator_csv, estimator_distribution, extreme_hetero_scenario,
    parse_cell_id, run_cells, standard_cells, ExperimentConfig, ExtremeScenarioConfig, RejectionTable,
    DESK_REPETITIONS, DESK_REPLICATIONS, DESK_TABLE_RUNS,
};
use selfnorm_cpd::limit_sim::{
    simulate_alternative_limit, simulate_quantiles, FunctionalKind, VarianceProfile, DEFAULT_GRID, DEFAULT_RUNS,
};
use selfnorm_cpd::methods::MethodRegistry;
use selfnorm_cpd::statistics::changepoint_estimate;
use serde::Serialize;

use crate::input::{load_series, IndexColumn, LoadedSeries};
use crate::report::{write_atomic, CliReport, EstimateReport, Provenance};

#[derive(Debug, Parser)]
#[command(name = "selfnorm", version, about = "Self-normalized changepoint tests for a change in mean")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a series for a single change in mean.
    Test(TestArgs),
    /// Estimate the changepoint location.
    Estimate(EstimateArgs),
    /// Simulate quantiles of a limit distribution.
    Crit(CritArgs),
    /// Generate a simulated series.
    Generate(GenerateArgs),
    /// Run a size and power study.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Q,
    R,
    Cusum,
}

impl From<Stat> for StatisticKind {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Q => StatisticKind::Q,
            Stat::R => StatisticKind::R,
            Stat::Cusum => StatisticKind::Cusum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Calibration {
    Bootstrap,
    Asymptotic,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Test statistic. `cusum` is the Bartlett-studentized CUSUM divided by
    /// sqrt(n), compared with quantiles of the supremum of a Brownian bridge.
    #[arg(long, value_enum, default_value = "q")]
    pub stat: Stat,
    /// Critical values; defaults to bootstrap, or asymptotic for cusum.
    #[arg(long, value_enum)]
    pub method: Option<Calibration>,
    /// Bootstrap replications.
    #[arg(long = "B", default_value_t = DEFAULT_REPLICATIONS)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `linear` or a JSON variance-profile file (asymptotic mode).
    #[arg(long, default_value = "linear")]
    pub eta: String,
    /// CUSUM bandwidth; defaults to floor(n/10), at least 1.
    #[arg(long = "M")]
    pub bandwidth: Option<usize>,
    /// Grid size of the simulated limit (asymptotic mode).
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub m: usize,
    /// Simulation runs of the limit (asymptotic mode).
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    /// Label column of a two-column file: position or header name.
    #[arg(long)]
    pub index_column: Option<IndexColumn>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Exit with status 1 when the null hypothesis is rejected.
    #[arg(long)]
    pub fail_on_reject: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub index_column: Option<IndexColumn>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CritArgs {
    /// `s`, `t` or `bridge_sup`.
    #[arg(long, default_value = "s")]
    pub functional: FunctionalKind,
    #[arg(long, default_value = "linear")]
    pub eta: String,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub m: usize,
    /// Defaults to 100000, or 20000 with --desk.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comma-separated levels, in percent or as fractions.
    #[arg(long, default_value = "90,95,97.5,99,99.5")]
    pub levels: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shift of a fixed alternative; simulates the bootstrap limit under it.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Change fraction of the fixed alternative.
    #[arg(long, default_value_t = 0.5, requires = "delta")]
    pub zeta: f64,
    #[arg(long)]
    pub desk: bool,
    /// JSON table output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// CSV table output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// iid, ar1, ar1_ar1, ar1_extreme or arch1_inc.
    #[arg(long, default_value = "iid")]
    pub dgp: String,
    /// normal or t3.
    #[arg(long, default_value = "normal")]
    pub innovations: String,
    #[arg(long, required_unless_present = "spec")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON model specification, instead of the model flags.
    #[arg(long, conflicts_with_all = ["dgp", "innovations", "n", "mu", "delta", "tau"])]
    pub spec: Option<PathBuf>,
    /// CSV output; standard output otherwise.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated cell ids, or `standard` for the full grid.
    #[arg(long)]
    pub cells: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    pub methods: Option<String>,
    /// Desk-scale defaults: 1000 repetitions, B = 500.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "B")]
    pub replications: Option<usize>,
    /// Comma-separated significance levels.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation runs of the asymptotic quantile tables.
    #[arg(long)]
    pub table_runs: Option<usize>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Also write changepoint-estimate samples of the alternative cells.
    #[arg(long)]
    pub estimator: bool,
    /// Also write size-adjusted power curves.
    #[arg(long)]
    pub curves: bool,
    /// Run the extreme heteroscedasticity scenario instead of the cells.
    #[arg(long)]
    pub extreme: bool,
}

/// Successful completion, or a rejection under `--fail-on-reject`.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Rejected,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Crit(a) => cmd_crit(a).map(|_| Outcome::Done),
        Command::Generate(a) => cmd_generate(a).map(|_| Outcome::Done),
        Command::Experiment(a) => cmd_experiment(a).map(|_| Outcome::Done),
    }
}

fn provenance(path: &Path, loaded: &LoadedSeries) -> Provenance {
    Provenance {
        path: path.display().to_string(),
        n: loaded.series.len(),
        sha256: loaded.sha256.clone(),
    }
}

fn load_profile(eta: &str) -> Result<VarianceProfile> {
    if eta == "linear" {
        return Ok(VarianceProfile::Constant);
    }
    let text = std::fs::read_to_string(eta).with_context(|| format!("cannot read variance profile {eta}"))?;
    let profile: VarianceProfile =
        serde_json::from_str(&text).with_context(|| format!("invalid variance profile in {eta}"))?;
    selfnorm_cpd::eta_from_sigma(&profile)?;
    Ok(profile)
}

fn emit(json: &str, output: Option<&Path>) -> Result<()> {
    println!("{json}");
    if let Some(path) = output {
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

pub fn cmd_test(a: TestArgs) -> Result<Outcome> {
    let loaded = load_series(&a.input, a.index_column.as_ref())?;
    let statistic = StatisticKind::from(a.stat);
    let calibration = a.method.unwrap_or(if a.stat == Stat::Cusum {
        Calibration::Asymptotic
    } else {
        Calibration::Bootstrap
    });
    if a.bandwidth.is_some() && a.stat != Stat::Cusum {
        bail!("--M applies to the cusum statistic only");
    }
    let report = match calibration {
        Calibration::Bootstrap => {
            if a.stat == Stat::Cusum {
                bail!("the cusum statistic uses simulated Brownian-bridge quantiles; use --method asymptotic");
            }
            let cfg = BootstrapConfig::new(statistic, a.replications, a.alpha, a.seed);
            run_test(&loaded.series, &TestMode::Bootstrap(cfg))?
        }
        Calibration::Asymptotic => {
            let table = simulate_quantiles(
                statistic.limit_functional(),
                &load_profile(&a.eta)?,
                a.m,
                a.runs,
                &[1.0 - a.alpha],
                a.seed,
            )?;
            let mode = TestMode::Asymptotic {
                statistic,
                alpha: a.alpha,
                table: &table,
                bandwidth: a.bandwidth,
            };
            run_test(&loaded.series, &mode)?
        }
    };
    let mut cli_report = CliReport::new("test", provenance(&a.input, &loaded));
    cli_report.estimate = report
        .estimate
        .map(|e| EstimateReport::new(e, loaded.label(e.tau_hat)));
    let rejected = report.reject;
    cli_report.test = Some(report);
    emit(&cli_report.to_json()?, a.output.as_deref())?;
    Ok(if rejected && a.fail_on_reject {
        Outcome::Rejected
    } else {
        Outcome::Done
    })
}

pub fn cmd_estimate(a: EstimateArgs) -> Result<Outcome> {
    let loaded = load_series(&a.input, a.index_column.as_ref())?;
    let estimate = changepoint_estimate(&loaded.series.prefix_sums());
    let mut report = CliReport::new("estimate", provenance(&a.input, &loaded));
    report.estimate = Some(EstimateReport::new(estimate, loaded.label(estimate.tau_hat)));
    emit(&report.to_json()?, a.output.as_deref())?;
    Ok(Outcome::Done)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow::anyhow!("invalid {what} `{s}`")))
        .collect()
}

/// Levels given in percent (`95`) or as fractions (`0.95`).
pub fn parse_levels(text: &str) -> Result<Vec<f64>> {
    Ok(parse_list::<f64>(text, "level")?
        .into_iter()
        .map(|l| if l > 1.0 { l / 100.0 } else { l })
        .collect())
}

pub fn cmd_crit(a: CritArgs) -> Result<()> {
    let profile = load_profile(&a.eta)?;
    let levels = parse_levels(&a.levels)?;
    let runs = a.runs.unwrap_or(if a.desk { DESK_TABLE_RUNS } else { DEFAULT_RUNS });
    let table = match a.delta {
        Some(delta) => simulate_alternative_limit(a.functional, &profile, delta, a.zeta, a.m, runs, &levels, a.seed)?,
        None => simulate_quantiles(a.functional, &profile, a.m, runs, &levels, a.seed)?,
    };
    emit(&serde_json::to_string_pretty(&table)?, a.output.as_deref())?;
    if let Some(path) = &a.csv {
        write_atomic(path, table.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<DgpSpec>(&text).with_context(|| format!("invalid model in {}", path.display()))?
        }
        None => DgpSpec {
            n: a.n.expect("required unless --spec"),
            mu: a.mu,
            delta: a.delta,
            tau: a.tau,
            errors: ErrorModel::from_tag(&a.dgp)?,
            innovations: Innovation::from_tag(&a.innovations)?,
        },
    };
    let csv = series_to_csv(&generate(&spec, a.seed)?);
    match &a.output {
        Some(path) => write_atomic(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    schema_version: u32,
    version: &'static str,
    config: Option<&'a ExperimentConfig>,
    table: &'a RejectionTable,
    files: Vec<String>,
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.config, &a.cells) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(cells)) => {
            let cells = if cells.trim() == "standard" {
                standard_cells(&[100, 400])
            } else {
                cells
                    .split(',')
                    .map(|c| parse_cell_id(c.trim()))
                    .collect::<selfnorm_cpd::Result<Vec<_>>>()?
            };
            if a.desk {
                ExperimentConfig::desk(cells)
            } else {
                ExperimentConfig::full(cells)
            }
        }
        (None, None) => bail!("give --config or --cells"),
    };
    if let Some(methods) = &a.methods {
        cfg.methods = parse_list(methods, "method")?;
    }
    if let Some(reps) = a.reps {
        cfg.repetitions = reps;
    }
    if let Some(b) = a.replications {
        cfg.replications = b;
    }
    if let Some(alphas) = &a.alphas {
        cfg.alphas = parse_list(alphas, "alpha")?;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = a.table_runs {
        cfg.table_runs = runs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_groups(dir: &Path, table: &RejectionTable, files: &mut Vec<String>) -> Result<()> {
    for (cell, method) in table.groups() {
        let name = RejectionTable::file_name(&cell, &method);
        write_atomic(&dir.join(&name), table.group_csv(&cell, &method).as_bytes())?;
        files.push(name);
    }
    Ok(())
}

pub fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let dir = &a.out_dir;
    let mut files = Vec::new();
    if a.extreme {
        let mut cfg = ExtremeScenarioConfig::desk(a.seed.unwrap_or(0), a.reps.unwrap_or(DESK_REPETITIONS));
        cfg.replications = a.replications.unwrap_or(DESK_REPLICATIONS);
        if let Some(alphas) = &a.alphas {
            cfg.alphas = parse_list(alphas, "alpha")?;
        }
        if let Some(runs) = a.table_runs {
            cfg.table_runs = runs;
        }
        let table = extreme_hetero_scenario(&cfg)?;
        write_groups(dir, &table, &mut files)?;
        write_atomic(&dir.join("extreme_rejection_rates.csv"), table.to_csv().as_bytes())?;
        files.push("extreme_rejection_rates.csv".into());
        return print_summary(dir, None, &table, files);
    }
    let cfg = experiment_config(&a)?;
    let outcomes = run_cells(&cfg, &MethodRegistry::default())?;
    let table = RejectionTable::from_outcomes(&outcomes);
    write_groups(dir, &table, &mut files)?;
    write_atomic(&dir.join("rejection_rates.csv"), table.to_csv().as_bytes())?;
    files.push("rejection_rates.csv".into());
    if a.estimator {
        let alt_cfg = ExperimentConfig {
            cells: cfg.cells.iter().filter(|c| !c.is_null()).copied().collect(),
            ..cfg.clone()
        };
        if !alt_cfg.cells.is_empty() {
            let samples = estimator_distribution(&alt_cfg)?;
            write_atomic(&dir.join("estimator.csv"), estimator_csv(&samples).as_bytes())?;
            files.push("estimator.csv".into());
        }
    }
    if a.curves {
        for alt in cfg.cells.iter().filter(|c| !c.is_null()) {
            let null = DgpSpec::null(alt.n, alt.errors, alt.innovations);
            if !cfg.cells.contains(&null) {
                continue;
            }
            for method in &cfg.methods {
                let curve = adjusted_size_power(&outcomes, &null.cell_id(), &alt.cell_id(), method)?;
                let name = format!("adjusted_{}_{method}.csv", alt.cell_id());
                write_atomic(&dir.join(&name), curve_csv(&curve).as_bytes())?;
                files.push(name);
            }
        }
    }
    print_summary(dir, Some(&cfg), &table, files)
}

fn print_summary(
    dir: &Path,
    config: Option<&ExperimentConfig>,
    table: &RejectionTable,
    files: Vec<String>,
) -> Result<()> {
    let summary = ExperimentSummary {
        schema_version: crate::report::SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION"),
        config,
        table,
        files,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&dir.join("summary.json"), format!("{json}\n").as_bytes())?;
    println!("{json}");
    Ok(())
}
