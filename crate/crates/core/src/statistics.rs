// SPDX-License-Identifier: MIT OR Apache-2.0

//! Self-normalized CUSUM statistics, the changepoint estimator and the
//! Bartlett-normalized CUSUM baseline.
//!
//! Finite samples can produce vanishing denominators, so every ratio follows
//! the same rules: an empty max or sum is 0, a term whose numerator is 0
//! contributes 0, and a positive numerator over a zero denominator is `+∞`.
//! A denominator is zero exactly when the segments before and after `k` are
//! both constant; this is decided by comparing observations, not by testing
//! rounded floating-point sums against zero.

use serde::{Deserialize, Serialize};

use crate::envelope::{running_abs_max, running_abs_max_direct, EnvelopeScratch};
use crate::error::{Error, Result};
use crate::series::{compensated_sum, PrefixSums, TimeSeries};

/// Largest input accepted by the naive oracles.
pub const NAIVE_LIMIT: usize = 4096;

/// Up to this length [`QMethod::Auto`] uses the direct evaluation.
pub const AUTO_DIRECT_MAX_LEN: usize = 32;

/// Relative cancellation threshold below which a prefix-moment expansion is
/// recomputed by direct summation.
const CANCELLATION_GUARD: f64 = 1e-7;

/// A non-negative statistic that may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedStatistic {
    #[serde(with = "extended_real")]
    pub value: f64,
    /// A zero-denominator convention was applied for at least one `k`.
    pub degenerate: bool,
}

impl ExtendedStatistic {
    pub const fn zero_degenerate() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Serializes `+∞` as the string `"inf"` so JSON stays valid.
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(serde::Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// Which evaluation of the sup-type denominators to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMethod {
    /// `O(n^2)` loop over all `(i, k)` pairs.
    Direct,
    /// `O(n log n)` convex-envelope queries.
    Envelope,
    /// `Direct` up to [`AUTO_DIRECT_MAX_LEN`] observations, `Envelope` above.
    #[default]
    Auto,
}

impl QMethod {
    fn resolve(self, n: usize) -> QMethod {
        match self {
            QMethod::Auto if n <= AUTO_DIRECT_MAX_LEN => QMethod::Direct,
            QMethod::Auto => QMethod::Envelope,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// 1-based index of the last observation before the change.
    pub tau_hat: usize,
    #[serde(with = "extended_real")]
    pub objective: f64,
    #[serde(with = "extended_real")]
    pub runner_up_gap: f64,
}

/// Bartlett long-run variance estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRunVariance {
    pub value: f64,
    /// The kernel sum was negative and has been clamped to 0.
    pub clamped: bool,
}

#[inline]
fn ratio(num: f64, den: f64, structural_zero: bool, degenerate: &mut bool) -> f64 {
    if structural_zero {
        *degenerate = true;
        return f64::INFINITY;
    }
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        *degenerate = true;
        f64::INFINITY
    } else {
        num / den
    }
}

/// `D(k) = max_{i<=k} |V(i) - (i/k)V(k)| + max_{k<i<=n} |Ṽ(i) - ((n-i)/(n-k))Ṽ(k)|`
/// for `k = 0..=n` (index 0 unused).
pub fn sup_denominators(ps: &PrefixSums, method: QMethod) -> Vec<f64> {
    let n = ps.len();
    let mut head = vec![0.0; n + 1];
    let mut tail = vec![0.0; n + 1];
    match method.resolve(n) {
        QMethod::Direct => {
            running_abs_max_direct(ps.centered(), &mut head);
            running_abs_max_direct(ps.reversed_centered(), &mut tail);
        }
        _ => {
            let mut scratch = EnvelopeScratch::default();
            running_abs_max(ps.centered(), &mut head, &mut scratch);
            running_abs_max(ps.reversed_centered(), &mut tail, &mut scratch);
        }
    }
    (0..=n)
        .map(|k| {
            let h = if ps.head_constant(k) { 0.0 } else { head[k] };
            let t = if ps.tail_constant(k) { 0.0 } else { tail[n - k] };
            h + t
        })
        .collect()
}

/// `Σ_{i=1..len} (x(i) - (i/len) x(len))^2` from prefix moments, falling back
/// to direct summation when the expansion cancels.
fn bridge_square_sum(x: &[f64], sq: &[f64], lin: &[f64], i2: &[f64], len: usize) -> f64 {
    let slope = x[len] / len as f64;
    let expanded = sq[len] - 2.0 * slope * lin[len] + slope * slope * i2[len];
    if expanded > CANCELLATION_GUARD * sq[len] {
        return expanded;
    }
    let mut acc = 0.0;
    for (i, &xi) in x.iter().enumerate().take(len + 1).skip(1) {
        let d = xi - slope * i as f64;
        acc += d * d;
    }
    acc
}

/// `E(k)` of the integral-type statistic for `k = 0..=n`; `O(n)` in the
/// absence of cancellation.
pub fn integral_denominators(ps: &PrefixSums) -> Vec<f64> {
    let n = ps.len();
    let c = ps.centered();
    let w = ps.reversed_centered();
    (0..=n)
        .map(|k| {
            let head = if k == 0 || ps.head_constant(k) {
                0.0
            } else {
                bridge_square_sum(c, ps.sv2(), ps.siv(), ps.si2(), k)
            };
            let len = n - k;
            let tail = if len == 0 || ps.tail_constant(k) {
                0.0
            } else {
                bridge_square_sum(w, ps.tail_sv2(), ps.tail_siv(), ps.si2(), len)
            };
            head + tail
        })
        .collect()
}

pub fn q_statistic(ps: &PrefixSums) -> ExtendedStatistic {
    q_statistic_with(ps, QMethod::Auto)
}

pub fn q_statistic_with(ps: &PrefixSums, method: QMethod) -> ExtendedStatistic {
    if ps.is_constant() {
        return ExtendedStatistic::zero_degenerate();
    }
    let n = ps.len();
    let c = ps.centered();
    let den = sup_denominators(ps, method);
    let mut degenerate = false;
    let mut best = 0.0f64;
    for k in 1..=n {
        let structural = ps.head_constant(k) && ps.tail_constant(k);
        let term = ratio(c[k].abs(), den[k], structural, &mut degenerate);
        best = best.max(term);
    }
    ExtendedStatistic {
        value: best,
        degenerate,
    }
}

pub fn r_statistic(ps: &PrefixSums) -> ExtendedStatistic {
    if ps.is_constant() {
        return ExtendedStatistic::zero_degenerate();
    }
    let n = ps.len();
    let c = ps.centered();
    let den = integral_denominators(ps);
    let mut degenerate = false;
    let mut total = 0.0f64;
    for k in 1..=n {
        let structural = ps.head_constant(k) && ps.tail_constant(k);
        total += ratio(c[k] * c[k], den[k], structural, &mut degenerate);
    }
    ExtendedStatistic {
        value: total,
        degenerate,
    }
}

/// Per-`k` quantities of the literal segment-mean form.
struct NaiveTerm {
    numerator: f64,
    head: Vec<f64>,
    tail: Vec<f64>,
    structural_zero: bool,
}

fn naive_terms(y: &[f64]) -> Vec<NaiveTerm> {
    let n = y.len();
    let all_equal = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let ybar = mean(y);
    (1..=n)
        .map(|k| {
            let numerator: f64 = y[..k].iter().map(|&v| v - ybar).sum();
            let head_const = all_equal(&y[..k]);
            let head_mean = mean(&y[..k]);
            // Σ_{j<=i} (Y_j - Ȳ_{1:k}) for i = 1..k
            let head: Vec<f64> = if head_const {
                vec![0.0; k]
            } else {
                (1..=k)
                    .map(|i| y[..i].iter().map(|&v| v - head_mean).sum())
                    .collect()
            };
            let (tail, tail_const) = if k == n {
                (Vec::new(), true)
            } else {
                let seg = &y[k..];
                let tail_mean = mean(seg);
                let tail_const = all_equal(seg);
                // Σ_{j=i..n} (Y_j - Ȳ_{(k+1):n}) for i = k+1..n
                let tail = if tail_const {
                    vec![0.0; n - k]
                } else {
                    (k..n)
                        .map(|i| y[i..].iter().map(|&v| v - tail_mean).sum())
                        .collect()
                };
                (tail, tail_const)
            };
            NaiveTerm {
                numerator,
                head,
                tail,
                structural_zero: head_const && tail_const,
            }
        })
        .collect()
}

fn naive_guard(series: &TimeSeries) -> Result<()> {
    if series.len() > NAIVE_LIMIT {
        return Err(Error::SizeGuard {
            len: series.len(),
            limit: NAIVE_LIMIT,
        });
    }
    Ok(())
}

/// Literal segment-mean evaluation of 𝒬; test oracle.
pub fn q_statistic_naive(series: &TimeSeries) -> Result<ExtendedStatistic> {
    naive_guard(series)?;
    if series.is_constant() {
        return Ok(ExtendedStatistic::zero_degenerate());
    }
    let mut degenerate = false;
    let mut best = 0.0f64;
    for t in naive_terms(series.values()) {
        let head = t.head.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = t.tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        best = best.max(ratio(t.numerator.abs(), head + tail, t.structural_zero, &mut degenerate));
    }
    Ok(ExtendedStatistic {
        value: best,
        degenerate,
    })
}

/// Literal segment-mean evaluation of ℛ; test oracle.
pub fn r_statistic_naive(series: &TimeSeries) -> Result<ExtendedStatistic> {
    naive_guard(series)?;
    if series.is_constant() {
        return Ok(ExtendedStatistic::zero_degenerate());
    }
    let mut degenerate = false;
    let mut total = 0.0f64;
    for t in naive_terms(series.values()) {
        let head: f64 = t.head.iter().map(|v| v * v).sum();
        let tail: f64 = t.tail.iter().map(|v| v * v).sum();
        total += ratio(t.numerator * t.numerator, head + tail, t.structural_zero, &mut degenerate);
    }
    Ok(ExtendedStatistic {
        value: total,
        degenerate,
    })
}

/// Argmax over `k` of `(|V(k) - (k/n)V(n)| + |Ṽ(n-k) - (k/n)V(n)|) / D(k)`,
/// smallest `k` on ties.
pub fn changepoint_estimate(ps: &PrefixSums) -> EstimateResult {
    changepoint_estimate_with(ps, QMethod::Auto)
}

pub fn changepoint_estimate_with(ps: &PrefixSums, method: QMethod) -> EstimateResult {
    let n = ps.len();
    if ps.is_constant() {
        return EstimateResult {
            tau_hat: 1,
            objective: 0.0,
            runner_up_gap: 0.0,
        };
    }
    let c = ps.centered();
    let den = sup_denominators(ps, method);
    let mut scratch = false;
    // With C(n) = 0: Ṽ(n-k) - (k/n)V(n) in centered form is -C(n-k).
    let objective: Vec<f64> = (1..=n)
        .map(|k| {
            let num = c[k].abs() + c[n - k].abs();
            let structural = ps.head_constant(k) && ps.tail_constant(k);
            ratio(num, den[k], structural, &mut scratch)
        })
        .collect();
    let mut arg = 0usize;
    for (i, &v) in objective.iter().enumerate() {
        if v > objective[arg] {
            arg = i;
        }
    }
    let best = objective[arg];
    let runner_up = objective
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let runner_up_gap = if best.is_infinite() {
        if runner_up.is_infinite() {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        best - runner_up
    };
    EstimateResult {
        tau_hat: arg + 1,
        objective: best,
        runner_up_gap,
    }
}

/// `R̂(0) + 2 Σ_{k=1..M} (1 - k/M) R̂(k)`, clamped at 0.
pub fn bartlett_lrv(series: &TimeSeries, bandwidth: usize) -> Result<LongRunVariance> {
    let n = series.len();
    if bandwidth < 1 || bandwidth >= n {
        return Err(Error::invalid(format!(
            "Bartlett bandwidth M={bandwidth} must satisfy 1 <= M < n={n}"
        )));
    }
    if series.is_constant() {
        return Ok(LongRunVariance {
            value: 0.0,
            clamped: false,
        });
    }
    let mean = series.mean();
    let d: Vec<f64> = series.values().iter().map(|&v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        let prods: Vec<f64> = d.iter().zip(&d[lag..]).map(|(a, b)| a * b).collect();
        compensated_sum(&prods) / n as f64
    };
    let m = bandwidth as f64;
    let mut value = autocov(0);
    for lag in 1..=bandwidth {
        value += 2.0 * (1.0 - lag as f64 / m) * autocov(lag);
    }
    if value < 0.0 {
        return Ok(LongRunVariance {
            value: 0.0,
            clamped: true,
        });
    }
    Ok(LongRunVariance {
        value,
        clamped: false,
    })
}

/// Default Bartlett bandwidth, `floor(n/10)` but at least 1.
pub fn default_bandwidth(n: usize) -> usize {
    (n / 10).max(1)
}

/// `max_{1<=k<n} |Σ_{i<=k} (Y_i - Ȳ)| / sqrt(σ̂²(M) · n)`.
///
/// The `1/sqrt(n)` factor puts the null limit on the scale of the supremum of
/// a standard Brownian bridge.
pub fn cusum_statistic(series: &TimeSeries, bandwidth: usize) -> Result<f64> {
    let lrv = bartlett_lrv(series, bandwidth)?;
    if lrv.value <= 0.0 {
        return Err(Error::Degenerate(format!(
            "Bartlett long-run variance estimate is zero (M={bandwidth}{})",
            if lrv.clamped { ", clamped from a negative kernel sum" } else { "" }
        )));
    }
    let n = series.len();
    let ps = series.prefix_sums();
    let c = ps.centered();
    let peak = c[1..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(peak / (lrv.value * n as f64).sqrt())
}
