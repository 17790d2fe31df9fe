// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo simulation of the null and fixed-alternative limit laws.
//!
//! A time-changed Wiener process `W(η(t))` is sampled on the grid `t = j/m`
//! and the discretized functionals are evaluated on the resulting path. On a
//! grid, the Riemann sums of the integral functional and the grid maxima of
//! the sup functional coincide with the finite-sample statistics applied to
//! the path as a cumulative sum, so both share the statistic kernels.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{order_statistic, sort_extended};
use crate::rng;
use crate::series::PrefixSums;
use crate::statistics::{q_statistic_with, r_statistic, ExtendedStatistic, QMethod};

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_RUNS: usize = 100_000;
pub const TABLE_LEVELS: [f64; 5] = [0.90, 0.95, 0.975, 0.99, 0.995];

const BATCHES: usize = 10;

/// `σ²(t)` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VarianceProfile {
    /// `σ² ≡ 1`, hence `η(t) = t`.
    Constant,
    /// `values[j]` on `[breaks[j-1], breaks[j])` with `breaks` the interior
    /// breakpoints in `(0, 1)`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation of `values` at `knots`, which run from 0 to 1.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

impl VarianceProfile {
    pub fn id(&self) -> String {
        match self {
            VarianceProfile::Constant => "linear".to_string(),
            VarianceProfile::PiecewiseConstant { breaks, values } => {
                format!("piecewise_constant{breaks:?}{values:?}")
            }
            VarianceProfile::PiecewiseLinear { knots, values } => {
                format!("piecewise_linear{knots:?}{values:?}")
            }
        }
    }

    /// `ς² = ∫₀¹ σ²(t) dt`.
    pub fn varsigma2(&self) -> Result<f64> {
        Ok(eta_from_sigma(self)?.total)
    }
}

/// Cumulative variance `η(t) = ∫₀ᵗσ² / ∫₀¹σ²`, integrated exactly on each
/// piece of a piecewise-linear `σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Eta {
    knots: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl Eta {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let seg = self.knots.partition_point(|&k| k <= t) - 1;
        let (x0, x1) = (self.knots[seg], self.knots[seg + 1]);
        let (a, b) = (self.left[seg], self.right[seg]);
        let h = t - x0;
        let partial = a * h + (b - a) * h * h / (2.0 * (x1 - x0));
        ((self.cumulative[seg] + partial) / self.total).clamp(0.0, 1.0)
    }

    /// `∫₀¹ σ²`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn grid(&self, m: usize) -> EtaGrid {
        let mut values: Vec<f64> = (0..=m).map(|j| self.eval(j as f64 / m as f64)).collect();
        values[0] = 0.0;
        values[m] = 1.0;
        EtaGrid { values }
    }
}

pub fn eta_from_sigma(profile: &VarianceProfile) -> Result<Eta> {
    let (knots, left, right) = match profile {
        VarianceProfile::Constant => (vec![0.0, 1.0], vec![1.0], vec![1.0]),
        VarianceProfile::PiecewiseConstant { breaks, values } => {
            if values.len() != breaks.len() + 1 {
                return Err(Error::Profile(format!(
                    "{} breakpoints need {} values, got {}",
                    breaks.len(),
                    breaks.len() + 1,
                    values.len()
                )));
            }
            let mut knots = vec![0.0];
            knots.extend(breaks.iter().copied());
            knots.push(1.0);
            (knots, values.clone(), values.clone())
        }
        VarianceProfile::PiecewiseLinear { knots, values } => {
            if knots.len() < 2 || values.len() != knots.len() {
                return Err(Error::Profile(
                    "piecewise-linear profile needs matching knots and values, at least two".into(),
                ));
            }
            if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
                return Err(Error::Profile("knots must start at 0 and end at 1".into()));
            }
            let l = values[..values.len() - 1].to_vec();
            let r = values[1..].to_vec();
            (knots.clone(), l, r)
        }
    };
    if !knots.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Profile("breakpoints must be strictly increasing within (0, 1)".into()));
    }
    if let Some(v) = left.iter().chain(&right).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Profile(format!("σ² must be positive and finite, got {v}")));
    }
    let mut cumulative = vec![0.0];
    for j in 0..left.len() {
        let width = knots[j + 1] - knots[j];
        cumulative.push(cumulative[j] + 0.5 * (left[j] + right[j]) * width);
    }
    let total = cumulative[left.len()];
    Ok(Eta {
        knots,
        left,
        right,
        cumulative,
        total,
    })
}

/// `η(j/m)` for `j = 0..=m`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaGrid {
    values: Vec<f64>,
}

impl EtaGrid {
    pub fn linear(m: usize) -> Self {
        EtaGrid {
            values: (0..=m).map(|j| j as f64 / m as f64).collect(),
        }
    }

    /// Accepts any non-decreasing grid from 0 to 1, including flat stretches.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::invalid("an η grid needs m >= 2"));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
            return Err(Error::Profile("η must satisfy η(0) = 0 and η(1) = 1".into()));
        }
        if !values.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::Profile("η must be non-decreasing".into()));
        }
        Ok(EtaGrid { values })
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `W(η(j/m))` for `j = 0..=m` with independent Gaussian increments.
pub fn simulate_path<R: Rng + ?Sized>(eta: &EtaGrid, rng: &mut R) -> Vec<f64> {
    let mut path = Vec::with_capacity(eta.values.len());
    path.push(0.0);
    let mut acc = 0.0;
    for w in eta.values.windows(2) {
        let z: f64 = StandardNormal.sample(rng);
        acc += (w[1] - w[0]).max(0.0).sqrt() * z;
        path.push(acc);
    }
    path
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// Sup-type functional, the limit of 𝒬.
    S,
    /// Integral-type functional, the limit of ℛ.
    T,
    /// `sup_t |W(t) - t W(1)|`, the null limit of the CUSUM statistic.
    BridgeSup,
}

impl FunctionalKind {
    pub fn name(self) -> &'static str {
        match self {
            FunctionalKind::S => "s",
            FunctionalKind::T => "t",
            FunctionalKind::BridgeSup => "bridge_sup",
        }
    }

    pub fn evaluate(self, path: &[f64]) -> ExtendedStatistic {
        match self {
            FunctionalKind::S => functional_s(path),
            FunctionalKind::T => functional_t(path),
            FunctionalKind::BridgeSup => ExtendedStatistic {
                value: bridge_sup(path),
                degenerate: false,
            },
        }
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FunctionalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "q" => Ok(FunctionalKind::S),
            "t" | "r" => Ok(FunctionalKind::T),
            "bridge_sup" | "bridge" | "cusum" => Ok(FunctionalKind::BridgeSup),
            _ => Err(Error::UnknownName {
                what: "functional",
                name: s.to_string(),
                available: "s, t, bridge_sup".into(),
            }),
        }
    }
}

fn path_sums(path: &[f64]) -> PrefixSums {
    PrefixSums::from_cumulative(path).expect("simulated paths have m >= 2 finite points")
}

/// Grid version of the sup-type functional.
pub fn functional_s(path: &[f64]) -> ExtendedStatistic {
    q_statistic_with(&path_sums(path), QMethod::Envelope)
}

/// Grid version of the integral-type functional, `O(m)`.
pub fn functional_t(path: &[f64]) -> ExtendedStatistic {
    r_statistic(&path_sums(path))
}

pub fn bridge_sup(path: &[f64]) -> f64 {
    let m = path.len() - 1;
    let (origin, end) = (path[0], path[m]);
    path.iter()
        .enumerate()
        .map(|(j, &p)| ((p - origin) - (j as f64 / m as f64) * (end - origin)).abs())
        .fold(0.0, f64::max)
}

/// `B_ζ(t)`: `(1-ζ)B(t)` for `t <= ζ`, `B(ζ) - ζB(t)` beyond.
pub fn b_zeta(t: f64, b_t: f64, b_at_zeta: f64, zeta: f64) -> f64 {
    if t <= zeta {
        (1.0 - zeta) * b_t
    } else {
        b_at_zeta - zeta * b_t
    }
}

/// Fixed-alternative parameters of the bootstrap limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    /// `δ/ς`.
    pub shift_ratio: f64,
    pub zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub functional: FunctionalKind,
    pub profile: String,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    /// Standard errors from sectioning the runs into 10 batches.
    pub mc_stderr: Vec<f64>,
    pub m: usize,
    pub runs: usize,
    pub seed: u64,
    /// Quantiles are not strictly increasing in level.
    pub ties: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<Alternative>,
}

impl QuantileTable {
    pub fn quantile_at(&self, level: f64) -> Result<f64> {
        self.levels
            .iter()
            .position(|&l| (l - level).abs() < 1e-9)
            .map(|i| self.quantiles[i])
            .ok_or(Error::MissingLevel {
                level,
                kind: self.functional.name().to_string(),
            })
    }

    /// `level,quantile,mc_stderr` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,quantile,mc_stderr\n");
        for ((l, q), s) in self.levels.iter().zip(&self.quantiles).zip(&self.mc_stderr) {
            out.push_str(&format!("{l},{q},{s}\n"));
        }
        out
    }

    fn from_samples(
        functional: FunctionalKind,
        profile: String,
        samples: Vec<f64>,
        levels: &[f64],
        m: usize,
        seed: u64,
        alternative: Option<Alternative>,
    ) -> Self {
        let runs = samples.len();
        let batch_len = runs / BATCHES;
        let batch_quantiles: Vec<Vec<f64>> = samples
            .chunks(batch_len)
            .take(BATCHES)
            .map(|chunk| {
                let mut c = chunk.to_vec();
                sort_extended(&mut c);
                levels.iter().map(|&l| order_statistic(&c, l)).collect()
            })
            .collect();
        let mut sorted = samples;
        sort_extended(&mut sorted);
        let quantiles: Vec<f64> = levels.iter().map(|&l| order_statistic(&sorted, l)).collect();
        let mc_stderr = (0..levels.len())
            .map(|i| {
                let xs: Vec<f64> = batch_quantiles.iter().map(|b| b[i]).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
                (var / xs.len() as f64).sqrt()
            })
            .collect();
        let ties = !quantiles.windows(2).all(|w| w[0] < w[1]);
        QuantileTable {
            functional,
            profile,
            levels: levels.to_vec(),
            quantiles,
            mc_stderr,
            m,
            runs,
            seed,
            ties,
            alternative,
        }
    }
}

fn validate_sim(m: usize, runs: usize, levels: &[f64]) -> Result<()> {
    if m < 100 {
        return Err(Error::invalid(format!("grid size m={m} must be at least 100")));
    }
    if runs < 1000 {
        return Err(Error::invalid(format!("runs={runs} must be at least 1000")));
    }
    if levels.is_empty() || levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::invalid("levels must be non-empty and lie in (0, 1)"));
    }
    if !levels.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("levels must be strictly increasing"));
    }
    Ok(())
}

/// Raw Monte-Carlo sample of a null limit functional, in run order.
pub fn simulate_null_sample(kind: FunctionalKind, eta: &EtaGrid, runs: usize, seed: u64) -> Vec<f64> {
    (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng::stream(seed, &[run]);
            kind.evaluate(&simulate_path(eta, &mut rng)).value
        })
        .collect()
}

pub fn simulate_quantiles(
    kind: FunctionalKind,
    profile: &VarianceProfile,
    m: usize,
    runs: usize,
    levels: &[f64],
    seed: u64,
) -> Result<QuantileTable> {
    validate_sim(m, runs, levels)?;
    let eta = eta_from_sigma(profile)?.grid(m);
    let samples = simulate_null_sample(kind, &eta, runs, seed);
    Ok(QuantileTable::from_samples(kind, profile.id(), samples, levels, m, seed, None))
}

/// Path of `W(η(t)) - (δ/ς) B_ζ(t)` on the grid.
pub fn simulate_alternative_path<R: Rng + ?Sized>(
    eta: &EtaGrid,
    alt: Alternative,
    rng: &mut R,
) -> Vec<f64> {
    let m = eta.m();
    let w = simulate_path(eta, rng);
    let b = simulate_path(&EtaGrid::linear(m), rng);
    // B(ζ) between grid points, drawn from the Brownian bridge between them.
    let pos = alt.zeta * m as f64;
    let j = (pos.floor() as usize).min(m - 1);
    let frac = pos - j as f64;
    let z: f64 = StandardNormal.sample(rng);
    let b_at_zeta = if frac == 0.0 {
        b[j]
    } else {
        b[j] + frac * (b[j + 1] - b[j]) + (frac * (1.0 - frac) / m as f64).sqrt() * z
    };
    (0..=m)
        .map(|i| {
            let t = i as f64 / m as f64;
            w[i] - alt.shift_ratio * b_zeta(t, b[i], b_at_zeta, alt.zeta)
        })
        .collect()
}

pub fn simulate_alternative_sample(
    kind: FunctionalKind,
    eta: &EtaGrid,
    alt: Alternative,
    runs: usize,
    seed: u64,
) -> Vec<f64> {
    (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng::stream(seed, &[run]);
            kind.evaluate(&simulate_alternative_path(eta, alt, &mut rng)).value
        })
        .collect()
}

/// Quantiles of the bootstrap limit under a fixed change of size `delta` at
/// fraction `zeta`; `δ` is divided by `ς = (∫σ²)^{1/2}` of the profile.
#[allow(clippy::too_many_arguments)]
pub fn simulate_alternative_limit(
    kind: FunctionalKind,
    profile: &VarianceProfile,
    delta: f64,
    zeta: f64,
    m: usize,
    runs: usize,
    levels: &[f64],
    seed: u64,
) -> Result<QuantileTable> {
    validate_sim(m, runs, levels)?;
    if !delta.is_finite() {
        return Err(Error::invalid("delta must be finite"));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::invalid(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let eta = eta_from_sigma(profile)?;
    let alt = Alternative {
        shift_ratio: delta / eta.total().sqrt(),
        zeta,
    };
    let samples = simulate_alternative_sample(kind, &eta.grid(m), alt, runs, seed);
    Ok(QuantileTable::from_samples(
        kind,
        profile.id(),
        samples,
        levels,
        m,
        seed,
        Some(alt),
    ))
}

/// Kolmogorov distribution function, the law of `sup |Brownian bridge|`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

pub fn kolmogorov_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.1, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
