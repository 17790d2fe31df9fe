// SPDX-License-Identifier: MIT OR Apache-2.0

//! Running maxima of `|C(i) - i·C(k)/k|` over `0 <= i <= k`.
//!
//! For a fixed slope `c`, `max_i C(i) - c·i` is attained on the upper convex
//! hull of the points `(i, C(i))` and `min_i` on the lower hull. Points arrive
//! with increasing abscissa, so both hulls are maintained as monotone stacks
//! and every query is a binary search over hull edges.

#[derive(Debug, Default)]
struct UpperHull {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl UpperHull {
    fn clear(&mut self) {
        self.xs.clear();
        self.ys.clear();
    }

    fn push(&mut self, x: f64, y: f64) {
        while self.xs.len() >= 2 {
            let l = self.xs.len();
            let (ox, oy) = (self.xs[l - 2], self.ys[l - 2]);
            let (ax, ay) = (self.xs[l - 1], self.ys[l - 1]);
            // Drop the last vertex unless (o, a, p) turns clockwise.
            let cross = (ax - ox) * (y - oy) - (ay - oy) * (x - ox);
            if cross >= 0.0 {
                self.xs.pop();
                self.ys.pop();
            } else {
                break;
            }
        }
        self.xs.push(x);
        self.ys.push(y);
    }

    /// `max_j ys[j] - slope * xs[j]`.
    fn query(&self, slope: f64) -> f64 {
        let len = self.xs.len();
        // Edge j is ascending for this slope while its own slope exceeds `slope`.
        let (mut lo, mut hi) = (0usize, len - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let rise = self.ys[mid + 1] - self.ys[mid];
            let run = self.xs[mid + 1] - self.xs[mid];
            if rise > slope * run {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let value = |j: usize| self.ys[j] - slope * self.xs[j];
        let mut best = value(lo);
        if lo > 0 {
            best = best.max(value(lo - 1));
        }
        if lo + 1 < len {
            best = best.max(value(lo + 1));
        }
        best
    }
}

/// Reusable buffers for [`running_abs_max`].
#[derive(Debug, Default)]
pub struct EnvelopeScratch {
    upper: UpperHull,
    lower: UpperHull,
}

/// Writes `out[k] = max_{0<=i<=k} |c[i] - i * (c[k]/k)|` for `k >= 1`
/// (`out[0] = 0`). `c[0]` is expected to be 0. `O(n log n)`.
pub fn running_abs_max(c: &[f64], out: &mut [f64], scratch: &mut EnvelopeScratch) {
    debug_assert_eq!(c.len(), out.len());
    let EnvelopeScratch { upper, lower } = scratch;
    upper.clear();
    lower.clear();
    upper.push(0.0, c[0]);
    lower.push(0.0, -c[0]);
    out[0] = 0.0;
    for k in 1..c.len() {
        let x = k as f64;
        upper.push(x, c[k]);
        lower.push(x, -c[k]);
        let slope = c[k] / x;
        let above = upper.query(slope);
        let below = lower.query(-slope);
        out[k] = above.max(below).max(0.0);
    }
}

/// Direct `O(n^2)` evaluation of the same running maxima.
pub fn running_abs_max_direct(c: &[f64], out: &mut [f64]) {
    debug_assert_eq!(c.len(), out.len());
    out[0] = 0.0;
    for k in 1..c.len() {
        let slope = c[k] / k as f64;
        let mut best = 0.0f64;
        for (i, &ci) in c.iter().enumerate().take(k + 1) {
            best = best.max((ci - slope * i as f64).abs());
        }
        out[k] = best;
    }
}
