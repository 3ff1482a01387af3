//! Mesoscale fluctuation detection on detrended residuals.
//!
//! The residual is smoothed with a short moving average, a robust noise
//! sigma is taken from a quiet leading window via the median absolute
//! deviation, and events are the sustained excursions beyond
//! `threshold_factor * sigma` whose duration falls in the mesoscale band.

use std::fmt;

use crate::error::{Error, Result};
use crate::trace::{Channel, TimeSeries};

use super::{mad_sigma, moving_average};

/// Which series an event was detected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesLabel {
    /// The channel-differential series `fluid_L - fluid_R`.
    Diff,
    Single(Channel),
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesLabel::Diff => f.write_str("diff"),
            SeriesLabel::Single(ch) => write!(f, "{ch}"),
        }
    }
}

/// A detected mesoscale excursion.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationEvent {
    pub channel: SeriesLabel,
    pub start: f64,
    pub duration: f64,
    /// Signed extremum of the smoothed residual within the event, C.
    pub peak_amplitude: f64,
    /// +1 for warming, -1 for cooling excursions.
    pub polarity: i8,
}

/// Detector tuning. The defaults target 1e-3 C scale events lasting tens of
/// minutes over 2e-4 C sensor noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationDetectorParams {
    /// Quiet leading span used for the baseline sigma, s.
    pub noise_window: f64,
    /// Event threshold in units of the baseline sigma.
    pub threshold_factor: f64,
    /// Accepted event duration band, s.
    pub min_duration: f64,
    pub max_duration: f64,
    /// Moving-average length applied before thresholding, s.
    pub smoothing: f64,
    /// Sub-threshold gaps shorter than this merge adjacent excursions, s.
    pub merge_gap: f64,
    pub channel: SeriesLabel,
}

impl Default for FluctuationDetectorParams {
    fn default() -> Self {
        FluctuationDetectorParams {
            noise_window: 7200.0,
            threshold_factor: 4.0,
            min_duration: 600.0,
            max_duration: 3600.0,
            smoothing: 60.0,
            merge_gap: 120.0,
            channel: SeriesLabel::Diff,
        }
    }
}

/// Detect mesoscale excursions in a detrended residual.
pub fn detect_fluctuations(
    residual: &TimeSeries,
    params: &FluctuationDetectorParams,
) -> Result<Vec<FluctuationEvent>> {
    if params.noise_window < 10.0 * params.smoothing {
        return Err(Error::NoiseWindowTooShort {
            window: params.noise_window,
            min: 10.0 * params.smoothing,
        });
    }
    let period = residual.sample_period;
    let smooth_samples = ((params.smoothing / period).round() as usize).max(1) | 1;
    let smoothed = moving_average(&residual.values, smooth_samples);

    let baseline_range = residual.index_range(
        residual.start_time,
        residual.start_time + params.noise_window,
    );
    if baseline_range.is_empty() {
        return Err(Error::DegenerateWindow(
            "noise window contains no samples".into(),
        ));
    }
    let sigma = mad_sigma(&smoothed[baseline_range]);
    let threshold = params.threshold_factor * sigma;

    // Maximal excursion intervals (half-open sample index ranges).
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &v) in smoothed.iter().enumerate() {
        if v.abs() > threshold {
            if open.is_none() {
                open = Some(i);
            }
        } else if let Some(start) = open.take() {
            intervals.push((start, i));
        }
    }
    if let Some(start) = open {
        intervals.push((start, smoothed.len()));
    }

    // Merge across short gaps.
    let gap_samples = (params.merge_gap / period).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (start, end) in intervals {
        match merged.last_mut() {
            Some((_, last_end)) if start.saturating_sub(*last_end) < gap_samples => {
                *last_end = end;
            }
            _ => merged.push((start, end)),
        }
    }

    let events = merged
        .into_iter()
        .filter_map(|(start, end)| {
            let duration = (end - start) as f64 * period;
            if duration < params.min_duration || duration > params.max_duration {
                return None;
            }
            let mut peak = 0.0_f64;
            for &v in &smoothed[start..end] {
                if v.abs() > peak.abs() {
                    peak = v;
                }
            }
            Some(FluctuationEvent {
                channel: params.channel,
                start: residual.time(start),
                duration,
                peak_amplitude: peak,
                polarity: if peak >= 0.0 { 1 } else { -1 },
            })
        })
        .collect();
    Ok(events)
}

/// Ratio of RMS residual levels between two disjoint windows, window b over
/// window a. Values above 1 mean the fluctuation level grew.
pub fn fluctuation_growth(
    residual: &TimeSeries,
    window_a: (f64, f64),
    window_b: (f64, f64),
) -> Result<f64> {
    for (name, (from, to)) in [("a", window_a), ("b", window_b)] {
        if to - from < 3600.0 {
            return Err(Error::DegenerateWindow(format!(
                "window {name} spans {:.0} s, need at least 3600 s",
                to - from
            )));
        }
    }
    let disjoint = window_a.1 <= window_b.0 || window_b.1 <= window_a.0;
    if !disjoint {
        return Err(Error::DegenerateWindow("windows overlap".into()));
    }

    let rms = |from: f64, to: f64| -> Result<f64> {
        let range = residual.index_range(from, to);
        if range.is_empty() {
            return Err(Error::DegenerateWindow(format!(
                "window [{from:.0}, {to:.0}) s has no samples"
            )));
        }
        let slice = &residual.values[range];
        Ok((slice.iter().map(|v| v * v).sum::<f64>() / slice.len() as f64).sqrt())
    };

    let rms_a = rms(window_a.0, window_a.1)?;
    let rms_b = rms(window_b.0, window_b.1)?;
    if rms_a == 0.0 {
        return Err(Error::DegenerateWindow(
            "window a has zero RMS residual".into(),
        ));
    }
    Ok(rms_b / rms_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn noise_series(sigma: f64, n: usize, seed: u64) -> TimeSeries {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        TimeSeries::new(0.0, 1.0, (0..n).map(|_| normal.sample(&mut rng)).collect())
    }

    fn add_gaussian_bump(series: &mut TimeSeries, center: f64, duration: f64, amplitude: f64) {
        let sigma = duration / 5.0;
        for i in 0..series.len() {
            let x = (series.time(i) - center) / sigma;
            series.values[i] += amplitude * (-0.5 * x * x).exp();
        }
    }

    #[test]
    fn all_zero_residual_has_no_events() {
        let s = TimeSeries::new(0.0, 1.0, vec![0.0; 20_000]);
        let events = detect_fluctuations(&s, &FluctuationDetectorParams::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn injected_bump_is_found_once_with_right_shape() {
        let mut s = noise_series(2e-4, 21_600, 11);
        add_gaussian_bump(&mut s, 12_000.0, 1800.0, 1.5e-3);
        let events = detect_fluctuations(&s, &FluctuationDetectorParams::default()).unwrap();
        assert_eq!(events.len(), 1, "events: {events:?}");
        let ev = &events[0];
        assert_eq!(ev.polarity, 1);
        assert!((ev.peak_amplitude - 1.5e-3).abs() <= 0.2 * 1.5e-3);
        assert!((ev.duration - 1800.0).abs() <= 0.25 * 1800.0);
    }

    #[test]
    fn cooling_excursion_has_negative_polarity() {
        let mut s = noise_series(2e-4, 21_600, 12);
        add_gaussian_bump(&mut s, 12_000.0, 1800.0, -1.5e-3);
        let events = detect_fluctuations(&s, &FluctuationDetectorParams::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].polarity, -1);
        assert!(events[0].peak_amplitude < 0.0);
    }

    #[test]
    fn clean_noise_rarely_alarms() {
        let s = noise_series(2e-4, 86_400, 13);
        let events = detect_fluctuations(&s, &FluctuationDetectorParams::default()).unwrap();
        assert!(events.len() <= 1, "false alarms: {events:?}");
    }

    #[test]
    fn noise_window_must_cover_ten_smoothing_lengths() {
        let s = noise_series(2e-4, 10_000, 14);
        let params = FluctuationDetectorParams {
            noise_window: 300.0,
            ..FluctuationDetectorParams::default()
        };
        assert!(matches!(
            detect_fluctuations(&s, &params),
            Err(Error::NoiseWindowTooShort { .. })
        ));
    }

    #[test]
    fn amplitude_scales_equivariantly() {
        let mut s = noise_series(2e-4, 21_600, 15);
        add_gaussian_bump(&mut s, 12_000.0, 1800.0, 1.5e-3);
        let base = detect_fluctuations(&s, &FluctuationDetectorParams::default()).unwrap();

        let mut scaled = s.clone();
        for v in &mut scaled.values {
            *v *= 3.0;
        }
        let tripled = detect_fluctuations(&scaled, &FluctuationDetectorParams::default()).unwrap();
        assert_eq!(base.len(), tripled.len());
        for (b, t) in base.iter().zip(&tripled) {
            assert_eq!(b.start, t.start);
            assert_eq!(b.duration, t.duration);
            assert!((t.peak_amplitude - 3.0 * b.peak_amplitude).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_ratio_tracks_sigma_change() {
        let mut s = noise_series(1e-4, 28_800, 16);
        // Double the sigma in the second half.
        for i in 14_400..28_800 {
            s.values[i] *= 2.0;
        }
        let ratio = fluctuation_growth(&s, (0.0, 14_400.0), (14_400.0, 28_800.0)).unwrap();
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");

        let flat = noise_series(1e-4, 28_800, 17);
        let ratio = fluctuation_growth(&flat, (0.0, 14_400.0), (14_400.0, 28_800.0)).unwrap();
        assert!((ratio - 1.0).abs() < 2.0 / (14_400.0_f64).sqrt() * 3.0);
    }

    #[test]
    fn growth_rejects_degenerate_windows() {
        let s = noise_series(1e-4, 28_800, 18);
        assert!(fluctuation_growth(&s, (0.0, 1800.0), (14_400.0, 28_800.0)).is_err());
        assert!(fluctuation_growth(&s, (0.0, 14_400.0), (7200.0, 14_400.0)).is_err());

        let mut half_zero = s.clone();
        for v in &mut half_zero.values[..14_400] {
            *v = 0.0;
        }
        assert!(matches!(
            fluctuation_growth(&half_zero, (0.0, 14_400.0), (14_400.0, 28_800.0)),
            Err(Error::DegenerateWindow(_))
        ));
    }
}
