//! Injectable mesoscale fluctuation events.
//!
//! Events enter the simulation as heat pulses on one fluid channel, so they
//! interact with the thermal dynamics the way a physical anomaly would. The
//! pulse power is calibrated against the linearized noiseless model so the
//! peak temperature excursion at the sensor matches the requested amplitude.

use crate::error::{Error, Result};
use crate::trace::Channel;

use super::{CalorimeterConfig, Mode};

/// Waveform of the injected heat pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventShape {
    GaussianBump,
    RaisedCosine,
}

/// One injected excursion: 1e-3 to 2e-3 C over 20 to 40 minutes is the
/// typical observed scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationEventSpec {
    /// Target channel; only the fluid channels can carry events.
    pub channel: Channel,
    pub start: f64,
    pub duration: f64,
    /// Peak temperature excursion, C. Negative for a cooling excursion.
    pub amplitude: f64,
    pub shape: EventShape,
}

impl FluctuationEventSpec {
    pub(crate) fn applies_to_left(&self) -> bool {
        self.channel == Channel::FluidL
    }

    pub(crate) fn validate(&self, config: &CalorimeterConfig) -> Result<()> {
        if !matches!(self.channel, Channel::FluidL | Channel::FluidR) {
            return Err(Error::InvalidConfig(format!(
                "events target fluid channels, not {}",
                self.channel
            )));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(Error::InvalidConfig("event duration must be > 0".into()));
        }
        if !self.start.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::NonFinite("event start or amplitude"));
        }
        let min_duration = 4.0 * config.sample_period;
        if self.duration < min_duration {
            return Err(Error::EventTooShort {
                duration: self.duration,
                min: min_duration,
            });
        }
        if self.start < 0.0 || self.start + self.duration > config.duration {
            return Err(Error::EventOutOfRange(format!(
                "event spans [{:.0}, {:.0}] s, trace covers [0, {:.0}] s",
                self.start,
                self.start + self.duration,
                config.duration
            )));
        }
        Ok(())
    }

    /// Unit pulse shape at time `t`, peaking at 1 mid-event.
    pub(crate) fn shape_at(&self, t: f64) -> f64 {
        match self.shape {
            EventShape::GaussianBump => {
                let center = self.start + 0.5 * self.duration;
                let sigma = self.duration / 5.0;
                let x = (t - center) / sigma;
                (-0.5 * x * x).exp()
            }
            EventShape::RaisedCosine => {
                if t < self.start || t > self.start + self.duration {
                    0.0
                } else {
                    let phase = (t - self.start) / self.duration;
                    0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos())
                }
            }
        }
    }
}

/// Peak temperature response of the target channel to the unit-power pulse,
/// from the linearized thermal model (environment and setpoint held fixed).
fn unit_peak_response(spec: &FluctuationEventSpec, config: &CalorimeterConfig) -> f64 {
    let c_l = config.channel_heat_capacity(true);
    let c_r = config.channel_heat_capacity(false);
    let r_sc = config.thermal_resistance_sample_chamber;
    let r_diff = config.thermal_resistance_differential;
    let left = spec.applies_to_left();

    // Perturbation state around the operating point.
    let mut d_l = 0.0_f64;
    let mut d_r = 0.0_f64;
    let mut d_ch = 0.0_f64;

    let tau_relax = c_l.max(c_r) * r_sc.min(r_diff);
    let t_end = spec.duration + 6.0 * tau_relax;
    let h = (config.sample_period)
        .min(config.min_time_constant() / 4.0)
        .min(spec.duration / 40.0);
    let steps = (t_end / h).ceil() as usize;

    let deriv = |t: f64, d_l: f64, d_r: f64, d_ch: f64| -> (f64, f64, f64) {
        let mean = 0.5 * (d_l + d_r);
        let p = spec.shape_at(spec.start + t);
        let delivery_l = (d_ch - mean) / r_sc + (mean - d_l) / r_diff;
        let delivery_r = (d_ch - mean) / r_sc + (mean - d_r) / r_diff;
        let (p_l, p_r) = if left { (p, 0.0) } else { (0.0, p) };
        let dd_ch = match config.mode {
            // The thermostat pins the chamber; sample heat does not feed back.
            Mode::Active => -d_ch / config.thermostat.tracking_time_constant,
            Mode::Passive => {
                (-d_ch / config.thermal_resistance_chamber_env - 2.0 * (d_ch - mean) / r_sc)
                    / config.chamber_heat_capacity
            }
        };
        ((delivery_l + p_l) / c_l, (delivery_r + p_r) / c_r, dd_ch)
    };

    let mut peak = 0.0_f64;
    let mut t = 0.0;
    for _ in 0..steps {
        let (k1l, k1r, k1c) = deriv(t, d_l, d_r, d_ch);
        let (k2l, k2r, k2c) = deriv(
            t + 0.5 * h,
            d_l + 0.5 * h * k1l,
            d_r + 0.5 * h * k1r,
            d_ch + 0.5 * h * k1c,
        );
        let (k3l, k3r, k3c) = deriv(
            t + 0.5 * h,
            d_l + 0.5 * h * k2l,
            d_r + 0.5 * h * k2r,
            d_ch + 0.5 * h * k2c,
        );
        let (k4l, k4r, k4c) = deriv(t + h, d_l + h * k3l, d_r + h * k3r, d_ch + h * k3c);
        d_l += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
        d_r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        d_ch += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        t += h;
        let excursion = if left { d_l } else { d_r };
        peak = peak.max(excursion.abs());
    }
    peak
}

/// Power amplitude (W per unit shape value) realizing the requested
/// temperature excursion.
pub(crate) fn power_scale(spec: &FluctuationEventSpec, config: &CalorimeterConfig) -> Result<f64> {
    if spec.amplitude == 0.0 {
        return Ok(0.0);
    }
    let peak = unit_peak_response(spec, config);
    if peak <= 0.0 {
        return Err(Error::InvalidConfig(
            "event pulse produces no thermal response".into(),
        ));
    }
    Ok(spec.amplitude / peak)
}

/// Heat-flux waveform (W) of one event, sampled on the trace grid.
pub fn render_event_power(
    spec: &FluctuationEventSpec,
    config: &CalorimeterConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    spec.validate(config)?;
    let scale = power_scale(spec, config)?;
    let n_samples = (config.duration / config.sample_period).floor() as usize + 1;
    Ok((0..n_samples)
        .map(|i| scale * spec.shape_at(i as f64 * config.sample_period))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_attempt, NoiseModel};

    fn noiseless_config() -> CalorimeterConfig {
        let mut cfg = CalorimeterConfig::default_active();
        cfg.noise = NoiseModel::noiseless();
        cfg.thermostat.control_accuracy = 0.0;
        cfg.thermostat.steps = vec![(0.0, 22.0)];
        cfg.duration = 14_400.0;
        cfg
    }

    fn peak_excursion(cfg: &CalorimeterConfig, spec: &FluctuationEventSpec) -> f64 {
        let with_event = simulate_attempt(cfg, std::slice::from_ref(spec)).unwrap();
        let baseline = simulate_attempt(cfg, &[]).unwrap();
        let series = with_event.channel(spec.channel);
        let base = baseline.channel(spec.channel);
        let mut peak = 0.0_f64;
        let mut signed = 0.0_f64;
        for (a, b) in series.iter().zip(base) {
            let d = a - b;
            if d.abs() > peak {
                peak = d.abs();
                signed = d;
            }
        }
        signed
    }

    #[test]
    fn zero_amplitude_renders_zero_power() {
        let cfg = noiseless_config();
        let spec = FluctuationEventSpec {
            channel: Channel::FluidL,
            start: 3600.0,
            duration: 1800.0,
            amplitude: 0.0,
            shape: EventShape::GaussianBump,
        };
        let power = render_event_power(&spec, &cfg).unwrap();
        assert!(power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn gaussian_bump_hits_requested_amplitude() {
        let cfg = noiseless_config();
        let spec = FluctuationEventSpec {
            channel: Channel::FluidL,
            start: 3600.0,
            duration: 1800.0,
            amplitude: 1.5e-3,
            shape: EventShape::GaussianBump,
        };
        let peak = peak_excursion(&cfg, &spec);
        assert!(
            (1.425e-3..=1.575e-3).contains(&peak),
            "peak excursion {peak}"
        );
    }

    #[test]
    fn raised_cosine_cooling_hits_requested_trough() {
        let cfg = noiseless_config();
        let spec = FluctuationEventSpec {
            channel: Channel::FluidR,
            start: 3600.0,
            duration: 1800.0,
            amplitude: -1.0e-3,
            shape: EventShape::RaisedCosine,
        };
        let trough = peak_excursion(&cfg, &spec);
        assert!(
            (-1.05e-3..=-0.95e-3).contains(&trough),
            "trough excursion {trough}"
        );
    }

    #[test]
    fn rejects_event_shorter_than_four_samples() {
        let mut cfg = noiseless_config();
        cfg.sample_period = 600.0;
        let spec = FluctuationEventSpec {
            channel: Channel::FluidL,
            start: 3600.0,
            duration: 1800.0,
            amplitude: 1e-3,
            shape: EventShape::GaussianBump,
        };
        match render_event_power(&spec, &cfg) {
            Err(Error::EventTooShort { .. }) => {}
            other => panic!("expected event-too-short, got {other:?}"),
        }
    }

    #[test]
    fn rejects_event_outside_trace() {
        let cfg = noiseless_config();
        let spec = FluctuationEventSpec {
            channel: Channel::FluidL,
            start: 13_800.0,
            duration: 1800.0,
            amplitude: 1e-3,
            shape: EventShape::GaussianBump,
        };
        assert!(matches!(
            render_event_power(&spec, &cfg),
            Err(Error::EventOutOfRange(_))
        ));
    }
}
