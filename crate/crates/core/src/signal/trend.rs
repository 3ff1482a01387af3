//! Trend models: ordinary least squares for linear and polynomial trends,
//! Levenberg-Marquardt for the exponential-approach model
//! `y = a + b * exp(-t / tau)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trace::TimeSeries;

/// Trend family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendKind {
    Linear,
    /// Polynomial of the given degree, 1 through 6.
    Polynomial(usize),
    /// `a + b * exp(-t/tau)`, the natural shape of zone-3 transients.
    ExpApproach,
}

/// A fitted trend. Polynomial coefficients are in ascending powers of
/// `t - t_ref` seconds; exp-approach parameters are `[a, b, tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendModel {
    pub kind: TrendKind,
    pub params: Vec<f64>,
    pub rms_residual: f64,
    /// Time origin the parameters refer to (the fit's first sample).
    pub t_ref: f64,
}

impl TrendModel {
    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.t_ref;
        match self.kind {
            TrendKind::Linear | TrendKind::Polynomial(_) => {
                // Horner evaluation in ascending-power storage.
                self.params.iter().rev().fold(0.0, |acc, &c| acc * u + c)
            }
            TrendKind::ExpApproach => {
                let (a, b, tau) = (self.params[0], self.params[1], self.params[2]);
                a + b * (-u / tau).exp()
            }
        }
    }
}

fn polynomial_degree(kind: TrendKind) -> Result<usize> {
    match kind {
        TrendKind::Linear => Ok(1),
        TrendKind::Polynomial(d) if (1..=6).contains(&d) => Ok(d),
        TrendKind::Polynomial(d) => Err(Error::InvalidConfig(format!(
            "polynomial degree {d} outside 1..=6"
        ))),
        TrendKind::ExpApproach => unreachable!("handled separately"),
    }
}

/// Fit a trend model to the series.
pub fn fit_trend(series: &TimeSeries, kind: TrendKind) -> Result<TrendModel> {
    match kind {
        TrendKind::ExpApproach => fit_exp_approach(series),
        _ => fit_polynomial(series, kind),
    }
}

fn fit_polynomial(series: &TimeSeries, kind: TrendKind) -> Result<TrendModel> {
    let degree = polynomial_degree(kind)?;
    let n = series.len();
    let n_params = degree + 1;
    if n <= n_params {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples cannot determine {n_params} parameters"
        )));
    }

    // Fit on t scaled to [0, 1] for conditioning, then rescale coefficients.
    let span = series.time(n - 1) - series.start_time;
    if span <= 0.0 {
        return Err(Error::RankDeficient);
    }
    let design = DMatrix::from_fn(n, n_params, |i, j| {
        let u = (series.time(i) - series.start_time) / span;
        u.powi(j as i32)
    });
    let rhs = DVector::from_iterator(n, series.values.iter().cloned());
    let normal = design.transpose() * &design;
    let moment = design.transpose() * &rhs;
    let solution = normal
        .cholesky()
        .ok_or(Error::RankDeficient)?
        .solve(&moment);

    let params: Vec<f64> = solution
        .iter()
        .enumerate()
        .map(|(j, &c)| c / span.powi(j as i32))
        .collect();
    let mut model = TrendModel {
        kind,
        params,
        rms_residual: 0.0,
        t_ref: series.start_time,
    };
    model.rms_residual = rms_of_residual(series, &model);
    Ok(model)
}

fn rms_of_residual(series: &TimeSeries, model: &TrendModel) -> f64 {
    let sum_sq: f64 = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - model.eval(series.time(i));
            r * r
        })
        .sum();
    (sum_sq / series.len() as f64).sqrt()
}

const LM_MAX_ITERATIONS: usize = 200;
const LM_RELATIVE_TOLERANCE: f64 = 1e-9;

fn fit_exp_approach(series: &TimeSeries) -> Result<TrendModel> {
    let n = series.len();
    if n <= 3 {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples cannot determine 3 parameters"
        )));
    }
    let span = series.time(n - 1) - series.start_time;
    if span <= 0.0 {
        return Err(Error::RankDeficient);
    }

    let first = series.values[0];
    let last = series.values[n - 1];
    let mut a = last;
    let mut b = first - last;
    let mut tau = span / 3.0;
    if b == 0.0 {
        b = 1e-12; // keep the Jacobian column alive for flat series
    }

    let times: Vec<f64> = (0..n).map(|i| series.time(i) - series.start_time).collect();
    let cost = |a: f64, b: f64, tau: f64| -> f64 {
        times
            .iter()
            .zip(&series.values)
            .map(|(&u, &y)| {
                let r = y - (a + b * (-u / tau).exp());
                r * r
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current_cost = cost(a, b, tau);
    for iteration in 0..LM_MAX_ITERATIONS {
        // Accumulate J^T J and J^T r with the analytic Jacobian.
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = nalgebra::Vector3::<f64>::zeros();
        for (&u, &y) in times.iter().zip(&series.values) {
            let e = (-u / tau).exp();
            let residual = y - (a + b * e);
            let grad = nalgebra::Vector3::new(1.0, e, b * u / (tau * tau) * e);
            jtj += grad * grad.transpose();
            jtr += grad * residual;
        }

        let mut accepted = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nb, ntau) = (a + step[0], b + step[1], tau + step[2]);
            if ntau <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let new_cost = cost(na, nb, ntau);
            if new_cost <= current_cost {
                let rel_change = (step[0].abs() / a.abs().max(1e-12))
                    .max(step[1].abs() / b.abs().max(1e-12))
                    .max(step[2].abs() / tau.abs().max(1e-12));
                a = na;
                b = nb;
                tau = ntau;
                current_cost = new_cost;
                lambda = (lambda / 10.0).max(1e-14);
                accepted = true;
                if rel_change < LM_RELATIVE_TOLERANCE {
                    let mut model = TrendModel {
                        kind: TrendKind::ExpApproach,
                        params: vec![a, b, tau],
                        rms_residual: 0.0,
                        t_ref: series.start_time,
                    };
                    model.rms_residual = rms_of_residual(series, &model);
                    return Ok(model);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted && iteration > 0 {
            // Damping saturated without progress; treat as converged to the
            // best found point if the fit is already tight, else report.
            break;
        }
    }

    let mut model = TrendModel {
        kind: TrendKind::ExpApproach,
        params: vec![a, b, tau],
        rms_residual: 0.0,
        t_ref: series.start_time,
    };
    model.rms_residual = rms_of_residual(series, &model);
    let scale = series
        .values
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()))
        .max(1e-12);
    if model.rms_residual / scale < 1e-9 {
        return Ok(model);
    }
    Err(Error::LmNonConvergence {
        iterations: LM_MAX_ITERATIONS,
        best: model,
    })
}

/// Residual after removing the fitted trend: `series - model(t)`.
pub fn detrend(series: &TimeSeries, model: &TrendModel) -> TimeSeries {
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &y)| y - model.eval(series.time(i)))
        .collect();
    TimeSeries::new(series.start_time, series.sample_period, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from(f: impl Fn(f64) -> f64, n: usize, period: f64) -> TimeSeries {
        let values = (0..n).map(|i| f(i as f64 * period)).collect();
        TimeSeries::new(0.0, period, values)
    }

    #[test]
    fn linear_fit_is_exact_on_linear_data() {
        let s = series_from(|t| 2.0 + 0.001 * t, 1000, 1.0);
        let model = fit_trend(&s, TrendKind::Linear).unwrap();
        assert!((model.params[0] - 2.0).abs() < 1e-10);
        assert!((model.params[1] - 0.001).abs() < 1e-10);
        assert!(model.rms_residual < 1e-10);
    }

    #[test]
    fn cubic_fit_of_constant_series_has_zero_leading_coefficients() {
        let s = series_from(|_| 5.0, 500, 10.0);
        let model = fit_trend(&s, TrendKind::Polynomial(3)).unwrap();
        assert!((model.params[0] - 5.0).abs() < 1e-10);
        for &c in &model.params[1..] {
            assert!(c.abs() < 1e-12, "leading coefficient {c}");
        }
        assert!(model.rms_residual < 1e-12);
    }

    #[test]
    fn exp_approach_recovers_synthetic_parameters() {
        let s = series_from(|t| 24.0 - 2.0 * (-t / 600.0).exp(), 3600, 1.0);
        let model = fit_trend(&s, TrendKind::ExpApproach).unwrap();
        assert!((model.params[0] - 24.0).abs() / 24.0 < 1e-6);
        assert!((model.params[1] + 2.0).abs() / 2.0 < 1e-6);
        assert!((model.params[2] - 600.0).abs() / 600.0 < 1e-6);
    }

    #[test]
    fn rejects_degenerate_fits() {
        let s = series_from(|t| t, 3, 1.0);
        assert!(matches!(
            fit_trend(&s, TrendKind::Polynomial(3)),
            Err(Error::SeriesTooShort(_))
        ));
        assert!(matches!(
            fit_trend(&s, TrendKind::Polynomial(9)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn detrend_removes_pure_trend_and_is_idempotent() {
        let s = series_from(|t| 1.5 - 3e-4 * t, 2000, 1.0);
        let model = fit_trend(&s, TrendKind::Linear).unwrap();
        let residual = detrend(&s, &model);
        assert!(residual.values.iter().all(|r| r.abs() < 1e-10));

        let refit = fit_trend(&residual, TrendKind::Linear).unwrap();
        assert!(refit.params[0].abs() < 1e-10);
        assert!(refit.params[1].abs() < 1e-10);
    }

    #[test]
    fn detrended_mean_is_zero_for_models_with_constant_term() {
        let s = series_from(|t| 20.0 + 1e-3 * t + 1e-7 * t * t, 5000, 1.0);
        let model = fit_trend(&s, TrendKind::Polynomial(2)).unwrap();
        let residual = detrend(&s, &model);
        let mean = residual.values.iter().sum::<f64>() / residual.len() as f64;
        assert!(mean.abs() < 1e-12, "residual mean {mean}");
    }

    #[test]
    fn detrend_preserves_injected_bump() {
        // A day-long record keeps the least-squares fit from absorbing a
        // meaningful share of the bump.
        let bump = |t: f64| {
            let x = (t - 10_000.0) / 360.0;
            1.5e-3 * (-0.5 * x * x).exp()
        };
        let s = series_from(|t| 22.0 + 2e-4 * t + bump(t), 20_000, 1.0);
        let model = fit_trend(&s, TrendKind::Linear).unwrap();
        let residual = detrend(&s, &model);
        let peak = residual.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!(
            (peak - 1.5e-3).abs() < 1.5e-4,
            "bump peak {peak} deviates by more than 10%"
        );
    }

    #[test]
    fn residuals_are_orthogonal_to_fitted_basis() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1e-3).unwrap();
        let mut s = series_from(|t| 3.0 + 2e-3 * t - 1e-8 * t * t, 3000, 1.0);
        for v in &mut s.values {
            *v += normal.sample(&mut rng);
        }
        let model = fit_trend(&s, TrendKind::Polynomial(2)).unwrap();
        let residual = detrend(&s, &model);
        let span = s.time(s.len() - 1) - s.start_time;
        let norm_r = residual.values.iter().map(|r| r * r).sum::<f64>().sqrt();
        for degree in 0..=2 {
            let basis: Vec<f64> = (0..s.len())
                .map(|i| ((s.time(i) - s.start_time) / span).powi(degree))
                .collect();
            let inner: f64 = residual.values.iter().zip(&basis).map(|(r, b)| r * b).sum();
            let norm_b = basis.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(
                inner.abs() <= 1e-9 * norm_r * norm_b,
                "degree {degree}: inner product {inner}"
            );
        }
    }
}
