//! Lead/lag analysis between the environmental temperature and the
//! calorimeter differential around environmental extrema.

use crate::error::{Error, Result};
use crate::trace::TimeSeries;

use super::moving_average;

/// Correlations below this are flagged unreliable; a Monte-Carlo null with
/// uncorrelated noise stays well under it.
const RELIABLE_CORRELATION: f64 = 0.3;

/// Smoothing applied to the environment series before extremum search, s.
const ENV_SMOOTHING: f64 = 3600.0;

/// Lag of the differential response around one environmental extremum.
#[derive(Debug, Clone, PartialEq)]
pub struct LagEstimate {
    /// Time of the environmental extremum, s.
    pub peak_time: f64,
    /// Positive when the calorimeter lags the environment, s.
    pub lag: f64,
    /// Peak normalized cross-correlation, in [-1, 1].
    pub correlation: f64,
    pub reliable: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

/// Local extrema (maxima and minima) of a smooth series, with plateaus
/// resolved to their first sample.
fn extrema_indices(values: &[f64]) -> Vec<usize> {
    let mut result = Vec::new();
    let mut direction = 0i8; // sign of the last non-zero difference
    let mut candidate = 0usize; // start of the current plateau
    for i in 1..values.len() {
        let diff = values[i] - values[i - 1];
        let sign = if diff > 0.0 {
            1
        } else if diff < 0.0 {
            -1
        } else {
            continue;
        };
        if direction != 0 && sign != direction {
            result.push(candidate);
        }
        direction = sign;
        candidate = i;
    }
    result
}

/// Estimate the differential lag at each environmental extremum.
///
/// Around every extremum of the 1 h smoothed environment series, the
/// normalized cross-correlation between environment and differential is
/// evaluated over a window of four `max_lag` spans; the reported lag is the
/// correlation argmax over lags in `[-max_lag, +max_lag]`.
pub fn lead_lag(
    env_series: &TimeSeries,
    diff_series: &TimeSeries,
    max_lag: f64,
) -> Result<Vec<LagEstimate>> {
    if env_series.len() != diff_series.len()
        || env_series.sample_period != diff_series.sample_period
        || env_series.start_time != diff_series.start_time
    {
        return Err(Error::InvalidConfig(
            "environment and differential series must share a time base".into(),
        ));
    }
    let period = env_series.sample_period;
    let n = env_series.len();
    let span = (n - 1) as f64 * period;
    if !max_lag.is_finite() || max_lag <= 0.0 || max_lag >= span / 4.0 {
        return Err(Error::InvalidConfig(format!(
            "max_lag must be positive and below a quarter of the span ({:.0} s)",
            span / 4.0
        )));
    }

    let smooth_samples = ((ENV_SMOOTHING / period).round() as usize).max(1) | 1;
    let smoothed_env = moving_average(&env_series.values, smooth_samples);
    let lag_samples = (max_lag / period).round() as usize;

    let mut all_extrema = extrema_indices(&smoothed_env);
    // Drop near-duplicate extrema closer than two lag spans.
    all_extrema.dedup_by(|next, kept| (*next - *kept) < 2 * lag_samples);

    let mut estimates = Vec::new();
    for &e in &all_extrema {
        // The correlation window plus the widest shift must stay in range.
        if e < 3 * lag_samples || e + 3 * lag_samples >= n {
            continue;
        }
        let window = (e - 2 * lag_samples)..(e + 2 * lag_samples + 1);
        let env_slice = &env_series.values[window.clone()];

        let correlation_at = |shift: isize| -> f64 {
            let lo = (window.start as isize + shift) as usize;
            let hi = (window.end as isize + shift) as usize;
            pearson(env_slice, &diff_series.values[lo..hi])
        };

        // Coarse argmax on a ~60 s grid, then single-sample refinement.
        let coarse_step = ((60.0 / period).round() as isize).max(1);
        let max_shift = lag_samples as isize;
        let mut best_shift = 0isize;
        let mut best_corr = f64::NEG_INFINITY;
        let mut shift = -max_shift;
        while shift <= max_shift {
            let c = correlation_at(shift);
            if c > best_corr {
                best_corr = c;
                best_shift = shift;
            }
            shift += coarse_step;
        }
        let lo = (best_shift - coarse_step).max(-max_shift);
        let hi = (best_shift + coarse_step).min(max_shift);
        for shift in lo..=hi {
            let c = correlation_at(shift);
            if c > best_corr {
                best_corr = c;
                best_shift = shift;
            }
        }

        estimates.push(LagEstimate {
            peak_time: env_series.time(e),
            lag: best_shift as f64 * period,
            correlation: best_corr,
            reliable: best_corr >= RELIABLE_CORRELATION,
        });
    }

    if estimates.is_empty() {
        return Err(Error::NoExtrema);
    }
    Ok(estimates)
}
