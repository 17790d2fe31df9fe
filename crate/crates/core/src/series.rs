// SPDX-License-Identifier: MIT OR Apache-2.0

//! Time series container and cumulative sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &x in values {
        acc.add(x);
    }
    acc.value()
}

/// Observations `Y_1..Y_n` of one equally spaced series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "observation {} is not finite ({})",
                pos + 1,
                values[pos]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(&self.values) / self.values.len() as f64
    }

    /// True when every observation is bit-for-bit equal to the first.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn prefix_sums(&self) -> PrefixSums {
        PrefixSums::new(self)
    }

    /// Mean of observations `i..=j` (1-based, inclusive).
    pub fn segment_mean(&self, i: usize, j: usize) -> Result<f64> {
        self.prefix_sums().segment_mean(i, j)
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<TimeSeries> for Vec<f64> {
    fn from(s: TimeSeries) -> Self {
        s.values
    }
}

/// Cumulative sums of a series plus the prefix moments used by the
/// integral-type statistic.
///
/// `v` holds the raw sums `V(0)=0, V(k)=Y_1+..+Y_k`. The statistics are
/// invariant to a common shift, so they work on the centered sums
/// `C(k) = V(k) - (k/n) V(n)`, which are accumulated from mean-removed
/// observations to avoid cancellation when the level is large. `C(n)` is
/// exactly zero. The reversed sums `W(j) = Ṽ(n-j) - (j/n)·0 = -C(n-j)`
/// describe the tail segments in the same head-anchored form.
#[derive(Clone, Debug)]
pub struct PrefixSums {
    n: usize,
    v: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
    sv2: Vec<f64>,
    siv: Vec<f64>,
    si2: Vec<f64>,
    tail_sv2: Vec<f64>,
    tail_siv: Vec<f64>,
    first_run: usize,
    last_run: usize,
    constant: bool,
}

impl PrefixSums {
    pub fn new(series: &TimeSeries) -> Self {
        let y = series.values();
        let n = y.len();
        let mut v = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::default();
        v.push(0.0);
        for &x in y {
            acc.add(x);
            v.push(acc.value());
        }
        let mean = compensated_sum(y) / n as f64;
        let mut c = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::default();
        c.push(0.0);
        for &x in y {
            acc.add(x - mean);
            c.push(acc.value());
        }
        let (first_run, last_run) = runs(y.iter().copied());
        Self::assemble(v, c, first_run, last_run)
    }

    /// Builds the sums from a cumulative path `p(0..=m)`; `V(k) = p(k) - p(0)`.
    /// Used for discretized limit processes, where the path is the primary object.
    pub fn from_cumulative(path: &[f64]) -> Result<Self> {
        if path.len() < 3 {
            return Err(Error::InvalidSeries(format!(
                "a cumulative path needs at least 3 points, got {}",
                path.len()
            )));
        }
        if path.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidSeries("path contains non-finite values".into()));
        }
        let m = path.len() - 1;
        let origin = path[0];
        let v: Vec<f64> = path.iter().map(|&p| p - origin).collect();
        let total = v[m];
        let c = (0..=m)
            .map(|k| v[k] - (k as f64 / m as f64) * total)
            .collect();
        let (first_run, last_run) = runs(path.windows(2).map(|w| w[1] - w[0]));
        Ok(Self::assemble(v, c, first_run, last_run))
    }

    fn assemble(v: Vec<f64>, mut c: Vec<f64>, first_run: usize, last_run: usize) -> Self {
        let n = v.len() - 1;
        let residual = c[n];
        if residual != 0.0 {
            for (k, ck) in c.iter_mut().enumerate() {
                *ck -= (k as f64 / n as f64) * residual;
            }
        }
        let w: Vec<f64> = (0..=n).map(|j| -c[n - j]).collect();
        let (sv2, siv) = moments(&c);
        let (tail_sv2, tail_siv) = moments(&w);
        let si2 = (0..=n)
            .scan(0.0f64, |s, i| {
                *s += (i * i) as f64;
                Some(*s)
            })
            .collect();
        Self {
            n,
            v,
            c,
            w,
            sv2,
            siv,
            si2,
            tail_sv2,
            tail_siv,
            first_run,
            last_run,
            constant: first_run == n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Raw cumulative sums `V(0..=n)`.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `Ṽ(k) = V(n) - V(k)`.
    pub fn tilde_v(&self, k: usize) -> f64 {
        self.v[self.n] - self.v[k]
    }

    /// Centered cumulative sums `C(0..=n)`.
    pub fn centered(&self) -> &[f64] {
        &self.c
    }

    /// Reversed centered sums `W(0..=n)` with `W(j) = -C(n-j)`.
    pub fn reversed_centered(&self) -> &[f64] {
        &self.w
    }

    /// Prefix sums of `C(i)^2`.
    pub fn sv2(&self) -> &[f64] {
        &self.sv2
    }

    /// Prefix sums of `i * C(i)`.
    pub fn siv(&self) -> &[f64] {
        &self.siv
    }

    /// Prefix sums of `i^2`.
    pub fn si2(&self) -> &[f64] {
        &self.si2
    }

    pub(crate) fn tail_sv2(&self) -> &[f64] {
        &self.tail_sv2
    }

    pub(crate) fn tail_siv(&self) -> &[f64] {
        &self.tail_siv
    }

    /// Every observation identical.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// `Y_1..Y_k` identical (true for `k <= 1`).
    pub fn head_constant(&self, k: usize) -> bool {
        k <= self.first_run
    }

    /// `Y_{k+1}..Y_n` identical (true for `k >= n-1`).
    pub fn tail_constant(&self, k: usize) -> bool {
        self.n - k <= self.last_run
    }

    pub fn segment_mean(&self, i: usize, j: usize) -> Result<f64> {
        if i < 1 || i > j || j > self.n {
            return Err(Error::IndexOutOfRange(format!(
                "segment [{i}, {j}] is not within 1 <= i <= j <= {}",
                self.n
            )));
        }
        Ok((self.v[j] - self.v[i - 1]) / (j - i + 1) as f64)
    }
}

/// Lengths of the leading and trailing runs of identical values.
fn runs(values: impl Iterator<Item = f64> + Clone) -> (usize, usize) {
    let all: Vec<f64> = values.collect();
    let n = all.len();
    let first = all.iter().take_while(|&&x| x == all[0]).count();
    let last = all.iter().rev().take_while(|&&x| x == all[n - 1]).count();
    (first, last)
}

fn moments(c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sq = Vec::with_capacity(c.len());
    let mut lin = Vec::with_capacity(c.len());
    let mut acc_sq = CompensatedSum::default();
    let mut acc_lin = CompensatedSum::default();
    for (i, &x) in c.iter().enumerate() {
        acc_sq.add(x * x);
        acc_lin.add(i as f64 * x);
        sq.push(acc_sq.value());
        lin.push(acc_lin.value());
    }
    (sq, lin)
}
