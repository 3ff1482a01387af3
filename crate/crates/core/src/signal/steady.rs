//! Zone-4 steady-state detection on the differential series.
//!
//! The trace is deemed steady from the first time where the least-squares
//! slope stays below the threshold for `hold` consecutive windows, which is
//! the "flat differential dynamics" criterion made quantitative.

use crate::trace::TimeSeries;

/// Flatness criterion for steady-state detection.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateCriterion {
    /// Slope-evaluation window, s.
    pub window: f64,
    /// Largest steady slope magnitude, C per minute.
    pub slope_threshold: f64,
    /// Consecutive flat windows required.
    pub hold: usize,
}

impl Default for SteadyStateCriterion {
    fn default() -> Self {
        SteadyStateCriterion {
            window: 600.0,
            slope_threshold: 1e-5,
            hold: 3,
        }
    }
}

/// Earliest time from which `hold` consecutive windows all have a
/// least-squares slope below the threshold, or `None` if the series never
/// flattens (including series shorter than `hold * window`).
pub fn detect_steady_state(series: &TimeSeries, criterion: &SteadyStateCriterion) -> Option<f64> {
    let n = series.len();
    let period = series.sample_period;
    let w = (criterion.window / period).round().max(2.0) as usize;
    let hold = criterion.hold.max(1);
    if n < hold * w {
        return None;
    }

    // Prefix sums give each window's least-squares slope in O(1):
    // slope = (sum j*y - mean_j * sum y) / (p * W(W^2-1)/12) over local j.
    let mut prefix_y = Vec::with_capacity(n + 1);
    let mut prefix_iy = Vec::with_capacity(n + 1);
    prefix_y.push(0.0);
    prefix_iy.push(0.0);
    for (i, &y) in series.values.iter().enumerate() {
        prefix_y.push(prefix_y[i] + y);
        prefix_iy.push(prefix_iy[i] + i as f64 * y);
    }
    let wf = w as f64;
    let denominator = period * wf * (wf * wf - 1.0) / 12.0;
    let mean_j = (wf - 1.0) / 2.0;

    let slope_per_minute = |s: usize| -> f64 {
        let sum_y = prefix_y[s + w] - prefix_y[s];
        let sum_iy = prefix_iy[s + w] - prefix_iy[s];
        let sum_jy = sum_iy - s as f64 * sum_y;
        60.0 * (sum_jy - mean_j * sum_y) / denominator
    };

    let last_anchor = n - hold * w;
    'anchor: for s in 0..=last_anchor {
        for j in 0..hold {
            if slope_per_minute(s + j * w).abs() >= criterion.slope_threshold {
                continue 'anchor;
            }
        }
        return Some(series.time(s));
    }
    None
}
