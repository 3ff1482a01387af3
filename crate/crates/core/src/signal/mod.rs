//! Trend removal, steady-state detection, mesoscale fluctuation detection
//! and environmental lead/lag analysis on temperature series.

mod fluct;
mod leadlag;
mod steady;
mod trend;

pub use fluct::{
    detect_fluctuations, fluctuation_growth, FluctuationDetectorParams, FluctuationEvent,
    SeriesLabel,
};
pub use leadlag::{lead_lag, LagEstimate};
pub use steady::{detect_steady_state, SteadyStateCriterion};
pub use trend::{detrend, fit_trend, TrendKind, TrendModel};

/// Centered moving average with shrinking windows at the edges.
pub(crate) fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    if window <= 1 || n == 0 {
        return values.to_vec();
    }
    let half = window / 2;
    // Prefix sums keep this O(n) for the long traces.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Median of a sample (average of the central pair for even lengths).
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Robust sigma estimate: 1.4826 times the median absolute deviation.
pub(crate) fn mad_sigma(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let med = median(values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    1.4826 * median(&deviations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_preserves_constants() {
        let v = vec![2.0; 100];
        assert_eq!(moving_average(&v, 7), v);
    }

    #[test]
    fn mad_sigma_matches_normal_sigma_roughly() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 2e-4).unwrap();
        let sample: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng)).collect();
        let sigma = mad_sigma(&sample);
        assert!((sigma - 2e-4).abs() < 2e-5, "sigma estimate {sigma}");
    }

    #[test]
    fn median_of_even_length() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
