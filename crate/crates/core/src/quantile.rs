// SPDX-License-Identifier: MIT OR Apache-2.0

//! Order-statistic quantiles shared by the bootstrap and the limit simulator.

/// Index (1-based) of the `⌈level·len⌉`-th order statistic, clamped to `1..=len`.
///
/// `level·len` is rounded before taking the ceiling so that products which
/// are integers in exact arithmetic (0.95·2000) are not pushed up by one.
pub fn order_index(level: f64, len: usize) -> usize {
    let raw = level * len as f64;
    let nearest = raw.round();
    let rank = if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (rank as usize).clamp(1, len)
}

/// `⌈level·len⌉`-th smallest element of an ascending slice.
pub fn order_statistic(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "order statistic of an empty sample");
    sorted[order_index(level, sorted.len()) - 1]
}

pub fn sort_extended(values: &mut [f64]) {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
}
