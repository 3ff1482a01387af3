//! Property suites for the estimation kernel, calibration and detectors.

use diffcal_core::estimator::{calibrate_dt, dc_over_c};
use diffcal_core::signal::{
    detect_fluctuations, detect_steady_state, FluctuationDetectorParams, SteadyStateCriterion,
};
use diffcal_core::TimeSeries;
use proptest::prelude::*;

/// Valid kernel inputs: dt well inside the physical region.
fn kernel_inputs() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.5f64..4.0, 0.8f64..1.25).prop_flat_map(|(delta_t, k)| {
        let bound = 0.4 * delta_t;
        (-bound..bound).prop_map(move |dt| (dt, delta_t, k))
    })
}

proptest! {
    #[test]
    fn kernel_is_strictly_decreasing_in_dt((dt, delta_t, k) in kernel_inputs()) {
        let smaller = dc_over_c(dt - 1e-3, delta_t, k).unwrap();
        let larger = dc_over_c(dt, delta_t, k).unwrap();
        prop_assert!(smaller > larger);
    }

    #[test]
    fn kernel_zero_law_is_exact(delta_t in 0.1f64..10.0) {
        prop_assert_eq!(dc_over_c(0.0, delta_t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn channel_swap_reciprocity((dt, delta_t, k) in kernel_inputs()) {
        // Swapping channels maps (dt, dT, k) to (-dt, dT + dt, 1/k) and the
        // capacity ratio to its reciprocal.
        let a = dc_over_c(dt, delta_t, k).unwrap();
        let b = dc_over_c(-dt, delta_t + dt, 1.0 / k).unwrap();
        prop_assert!(((1.0 + a) * (1.0 + b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_scale_invariant((dt, delta_t, k) in kernel_inputs(), scale in 0.1f64..10.0) {
        let base = dc_over_c(dt, delta_t, k).unwrap();
        let scaled = dc_over_c(scale * dt, scale * delta_t, k).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn calibration_is_shift_invariant(
        dt in -0.5f64..0.5,
        controls in prop::collection::vec(-0.5f64..0.5, 1..8),
        shift in -1.0f64..1.0,
    ) {
        let base = calibrate_dt(dt, &controls).unwrap();
        let shifted: Vec<f64> = controls.iter().map(|c| c + shift).collect();
        let moved = calibrate_dt(dt + shift, &shifted).unwrap();
        prop_assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn steady_detection_is_monotone_in_threshold(
        amplitude in 0.01f64..0.1,
        tau in 300.0f64..1200.0,
    ) {
        let n = 10_000;
        let series = TimeSeries::new(
            0.0,
            1.0,
            (0..n).map(|i| amplitude * (-(i as f64) / tau).exp()).collect(),
        );
        let mut previous: Option<f64> = None;
        for threshold in [1e-6, 1e-5, 1e-4, 1e-3] {
            let criterion = SteadyStateCriterion {
                slope_threshold: threshold,
                ..SteadyStateCriterion::default()
            };
            let detected = detect_steady_state(&series, &criterion);
            match (previous, detected) {
                // A higher threshold may start detecting, but must never
                // detect later than a lower threshold did.
                (Some(earlier), Some(now)) => prop_assert!(now <= earlier),
                (Some(_), None) => prop_assert!(false, "detection lost at higher threshold"),
                _ => {}
            }
            if detected.is_some() {
                previous = detected;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fluctuation_detection_is_scale_equivariant(scale in 0.2f64..5.0, seed in 0u64..1000) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 2e-4).unwrap();
        let n = 18_000;
        let mut values: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let sigma = 1500.0 / 5.0;
        for (i, v) in values.iter_mut().enumerate() {
            let x = (i as f64 - 10_000.0) / sigma;
            *v += 1.5e-3 * (-0.5 * x * x).exp();
        }
        let base_series = TimeSeries::new(0.0, 1.0, values.clone());
        let scaled_series =
            TimeSeries::new(0.0, 1.0, values.iter().map(|v| v * scale).collect());

        let params = FluctuationDetectorParams::default();
        let base = detect_fluctuations(&base_series, &params).unwrap();
        let scaled = detect_fluctuations(&scaled_series, &params).unwrap();
        prop_assert_eq!(base.len(), scaled.len());
        for (b, s) in base.iter().zip(&scaled) {
            prop_assert_eq!(b.start, s.start);
            prop_assert_eq!(b.duration, s.duration);
            prop_assert!((s.peak_amplitude - scale * b.peak_amplitude).abs() < 1e-12);
            prop_assert_eq!(b.polarity, s.polarity);
        }
    }
}
