//! Lumped-parameter thermal simulation of the two-channel calorimeter.
//!
//! Each fluid channel (sample plus container) is one thermal node coupled to
//! a shared chamber node. In active mode the chamber tracks the thermostat
//! setpoint; in passive mode it is a dewar exchanging with the environment.
//! Heat reaches the samples through the common delivery path
//! `(T_chamber - T_mean) / R_sample_chamber` while the two channels relax
//! toward each other through `(T_mean - T_i) / R_differential`. With
//! `R_differential = R_sample_chamber` (the default) the two terms collapse
//! to the plain per-channel coupling `(T_chamber - T_i) / R_sample_chamber`;
//! raising `R_differential` models an instrument whose channels are
//! thermally isolated from each other and receive equal heat flux.

mod events;

pub use events::{render_event_power, EventShape, FluctuationEventSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::trace::MultiChannelTrace;

/// Operating mode of the calorimeter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Thermostated chamber following a setpoint schedule.
    Active,
    /// Dewar chamber passively exchanging with the environment.
    Passive,
}

/// Piecewise-constant thermostat setpoint schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermostatProfile {
    /// Ordered `(time s, setpoint C)` steps; times strictly increasing.
    pub steps: Vec<(f64, f64)>,
    /// First-order tracking time constant of the chamber, s.
    pub tracking_time_constant: f64,
    /// Bound on the control error around the setpoint, C.
    pub control_accuracy: f64,
}

impl ThermostatProfile {
    pub fn new(steps: Vec<(f64, f64)>, tracking_time_constant: f64, control_accuracy: f64) -> Self {
        ThermostatProfile {
            steps,
            tracking_time_constant,
            control_accuracy,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidConfig(
                "thermostat profile needs at least one step".into(),
            ));
        }
        for pair in self.steps.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidConfig(
                    "thermostat step times must be strictly increasing".into(),
                ));
            }
        }
        for &(t, sp) in &self.steps {
            if !t.is_finite() || !sp.is_finite() {
                return Err(Error::NonFinite("thermostat step"));
            }
        }
        if !self.tracking_time_constant.is_finite() || self.tracking_time_constant <= 0.0 {
            return Err(Error::InvalidConfig(
                "tracking_time_constant must be > 0".into(),
            ));
        }
        if !self.control_accuracy.is_finite() || self.control_accuracy < 0.0 {
            return Err(Error::InvalidConfig("control_accuracy must be >= 0".into()));
        }
        Ok(())
    }

    /// Time of the last setpoint change, i.e. the measurement step of a
    /// two-point diathermic profile.
    pub fn measurement_step_time(&self) -> f64 {
        self.steps.last().map(|&(t, _)| t).unwrap_or(0.0)
    }
}

/// Setpoint of the latest step with `time <= t`; before the first step the
/// first setpoint applies.
pub fn thermostat_setpoint(profile: &ThermostatProfile, t: f64) -> f64 {
    let mut current = profile.steps[0].1;
    for &(time, setpoint) in &profile.steps {
        if time <= t {
            current = setpoint;
        } else {
            break;
        }
    }
    current
}

/// Laboratory temperature model: mean, circadian oscillation, slow drift.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    pub mean_temp: f64,
    /// Half peak-to-peak circadian amplitude, C.
    pub circadian_amplitude: f64,
    pub circadian_period: f64,
    /// Linear drift, C per day.
    pub slow_drift_rate: f64,
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        // The prepared laboratory shows about 0.3 C peak-to-peak per day.
        EnvironmentModel {
            mean_temp: 21.0,
            circadian_amplitude: 0.15,
            circadian_period: 86_400.0,
            slow_drift_rate: 0.0,
        }
    }
}

impl EnvironmentModel {
    fn validate(&self) -> Result<()> {
        if self.circadian_period <= 0.0 {
            return Err(Error::InvalidConfig("circadian_period must be > 0".into()));
        }
        if self.circadian_amplitude < 0.0 {
            return Err(Error::InvalidConfig(
                "circadian_amplitude must be >= 0".into(),
            ));
        }
        for (v, name) in [
            (self.mean_temp, "environment.mean_temp"),
            (self.circadian_amplitude, "environment.circadian_amplitude"),
            (self.circadian_period, "environment.circadian_period"),
            (self.slow_drift_rate, "environment.slow_drift_rate"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn temp_at(&self, t: f64) -> f64 {
        self.mean_temp
            + self.circadian_amplitude
                * (2.0 * std::f64::consts::PI * t / self.circadian_period).sin()
            + self.slow_drift_rate * t / 86_400.0
    }
}

/// Sensor and filling noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// White sensor noise per sample, C.
    pub sensor_white_sigma: f64,
    /// ADC quantization step, C. Every emitted sample is a multiple of it.
    pub quantization_step: f64,
    /// One-time filling error per container, kg.
    pub fill_error_sigma: f64,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        // 24-bit ADC resolves below 1e-5 C; residual scatter sits near 2e-4 C.
        // 0.05 ml of water is 5e-5 kg.
        NoiseModel {
            sensor_white_sigma: 2e-4,
            quantization_step: 1e-5,
            fill_error_sigma: 5e-5,
            rng_seed: 1,
        }
    }
}

impl NoiseModel {
    /// Zero sensor and fill noise with a negligible quantization step, for
    /// oracle comparisons against closed-form dynamics.
    pub fn noiseless() -> Self {
        NoiseModel {
            sensor_white_sigma: 0.0,
            quantization_step: 1e-12,
            fill_error_sigma: 0.0,
            rng_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.sensor_white_sigma.is_finite() || self.sensor_white_sigma < 0.0 {
            return Err(Error::InvalidConfig(
                "sensor_white_sigma must be >= 0".into(),
            ));
        }
        if !self.fill_error_sigma.is_finite() || self.fill_error_sigma < 0.0 {
            return Err(Error::InvalidConfig("fill_error_sigma must be >= 0".into()));
        }
        if !self.quantization_step.is_finite() || self.quantization_step <= 0.0 {
            return Err(Error::InvalidConfig("quantization_step must be > 0".into()));
        }
        Ok(())
    }
}

/// Full configuration of one simulated measurement attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct CalorimeterConfig {
    pub mode: Mode,
    /// Nominal water mass per channel, kg.
    pub sample_mass_l: f64,
    pub sample_mass_r: f64,
    /// Specific heat of the unexcited fluid, J/(kg C).
    pub specific_heat_base: f64,
    /// Relative specific-heat change applied to the left (experimental) channel.
    pub dc_over_c_injected: f64,
    /// Container heat capacity per channel, J/C.
    pub container_heat_capacity: f64,
    /// Chamber-to-sample coupling, C/W.
    pub thermal_resistance_sample_chamber: f64,
    /// Channel-to-channel relaxation path, C/W. Equal to
    /// `thermal_resistance_sample_chamber` for the plain per-channel coupling.
    pub thermal_resistance_differential: f64,
    /// Chamber-to-environment coupling in passive mode, C/W.
    pub thermal_resistance_chamber_env: f64,
    /// Chamber (dewar) heat capacity in passive mode, J/C.
    pub chamber_heat_capacity: f64,
    pub thermostat: ThermostatProfile,
    pub environment: EnvironmentModel,
    pub noise: NoiseModel,
    /// Initial fluid temperatures, C.
    pub initial_temp_l: f64,
    pub initial_temp_r: f64,
    pub sample_period: f64,
    pub duration: f64,
}

/// Highest accepted sub-step count per emitted sample before a configuration
/// is rejected as too stiff for the fixed-step integrator.
const MAX_SUBSTEPS: usize = 1000;

impl CalorimeterConfig {
    /// Active-thermostat configuration with the reference defaults:
    /// 15 ml water samples, 22 -> 24 C profile stepping at 7200 s.
    pub fn default_active() -> Self {
        CalorimeterConfig {
            mode: Mode::Active,
            sample_mass_l: 0.015,
            sample_mass_r: 0.015,
            specific_heat_base: 4186.0,
            dc_over_c_injected: 0.0,
            container_heat_capacity: 15.0,
            thermal_resistance_sample_chamber: 11.6,
            thermal_resistance_differential: 11.6,
            thermal_resistance_chamber_env: 500.0,
            chamber_heat_capacity: 350.0,
            thermostat: ThermostatProfile::new(vec![(0.0, 22.0), (7200.0, 24.0)], 300.0, 0.002),
            environment: EnvironmentModel::default(),
            noise: NoiseModel::default(),
            initial_temp_l: 22.0,
            initial_temp_r: 22.0,
            sample_period: 1.0,
            duration: 14_400.0,
        }
    }

    /// Passive dewar configuration (samples inserted warmer than the dewar).
    pub fn default_passive() -> Self {
        CalorimeterConfig {
            mode: Mode::Passive,
            initial_temp_l: 21.0,
            initial_temp_r: 21.0,
            environment: EnvironmentModel {
                mean_temp: 17.0,
                ..EnvironmentModel::default()
            },
            duration: 86_400.0,
            ..CalorimeterConfig::default_active()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            (self.sample_mass_l, "sample_mass_l"),
            (self.sample_mass_r, "sample_mass_r"),
            (self.specific_heat_base, "specific_heat_base"),
            (self.container_heat_capacity, "container_heat_capacity"),
            (
                self.thermal_resistance_sample_chamber,
                "thermal_resistance_sample_chamber",
            ),
            (
                self.thermal_resistance_differential,
                "thermal_resistance_differential",
            ),
            (
                self.thermal_resistance_chamber_env,
                "thermal_resistance_chamber_env",
            ),
            (self.chamber_heat_capacity, "chamber_heat_capacity"),
            (self.sample_period, "sample_period"),
        ];
        for (value, name) in positives {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
            if value <= 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        for (value, name) in [
            (self.dc_over_c_injected, "dc_over_c_injected"),
            (self.initial_temp_l, "initial_temp_l"),
            (self.initial_temp_r, "initial_temp_r"),
            (self.duration, "duration"),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        if self.dc_over_c_injected <= -1.0 {
            return Err(Error::InvalidConfig(
                "dc_over_c_injected must be > -1".into(),
            ));
        }
        if self.duration < self.sample_period {
            return Err(Error::InvalidConfig(
                "duration must cover at least one sample period".into(),
            ));
        }
        self.thermostat.validate()?;
        self.environment.validate()?;
        self.noise.validate()
    }

    /// Specific heat of the left channel with the injected change applied.
    pub fn specific_heat_l(&self) -> f64 {
        self.specific_heat_base * (1.0 + self.dc_over_c_injected)
    }

    /// Total nominal heat capacity of one channel (fluid plus container), J/C.
    pub fn channel_heat_capacity(&self, left: bool) -> f64 {
        if left {
            self.sample_mass_l * self.specific_heat_l() + self.container_heat_capacity
        } else {
            self.sample_mass_r * self.specific_heat_base + self.container_heat_capacity
        }
    }

    /// Nominal mass ratio `m_R / m_L` with containers folded in as
    /// water-equivalent mass.
    pub fn nominal_mass_ratio(&self) -> f64 {
        let equivalent = self.container_heat_capacity / self.specific_heat_base;
        (self.sample_mass_r + equivalent) / (self.sample_mass_l + equivalent)
    }

    /// Smallest time constant of the thermal network, used for the
    /// integrator stability bound.
    fn min_time_constant(&self) -> f64 {
        let r_parallel = 1.0
            / (1.0 / self.thermal_resistance_sample_chamber
                + 1.0 / self.thermal_resistance_differential);
        let tau_l = self.channel_heat_capacity(true) * r_parallel;
        let tau_r = self.channel_heat_capacity(false) * r_parallel;
        let tau_chamber = match self.mode {
            Mode::Active => self.thermostat.tracking_time_constant,
            Mode::Passive => {
                self.chamber_heat_capacity
                    / (1.0 / self.thermal_resistance_chamber_env
                        + 2.0 / self.thermal_resistance_sample_chamber)
            }
        };
        tau_l.min(tau_r).min(tau_chamber)
    }

    /// Sub-steps per emitted sample keeping the RK4 step below a quarter of
    /// the smallest time constant.
    pub(crate) fn substeps_per_sample(&self) -> Result<usize> {
        let limit = self.min_time_constant() / 4.0;
        let required = (self.sample_period / limit).ceil().max(1.0) as usize;
        if required > MAX_SUBSTEPS {
            return Err(Error::StiffConfiguration {
                sample_period: self.sample_period,
                required,
                limit: MAX_SUBSTEPS,
            });
        }
        Ok(required)
    }
}

/// Deterministic per-purpose RNG streams derived from the attempt seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const STREAM_FILL: u64 = 0;
const STREAM_SENSOR_BASE: u64 = 1; // five channels: 1..=5
const STREAM_CONTROL: u64 = 6;

/// Thermal state: left fluid, right fluid, chamber.
#[derive(Clone, Copy)]
struct State {
    fluid_l: f64,
    fluid_r: f64,
    chamber: f64,
}

struct Dynamics<'a> {
    config: &'a CalorimeterConfig,
    heat_capacity_l: f64,
    heat_capacity_r: f64,
    events: &'a [(FluctuationEventSpec, f64)],
    /// Chamber target (setpoint plus control deviation) in active mode,
    /// frozen per integration interval so the piecewise-constant setpoint
    /// never changes between RK4 stages.
    chamber_target: f64,
}

impl Dynamics<'_> {
    fn event_power(&self, left: bool, t: f64) -> f64 {
        self.events
            .iter()
            .filter(|(spec, _)| spec.applies_to_left() == left)
            .map(|(spec, scale)| scale * spec.shape_at(t))
            .sum()
    }

    fn derivative(&self, t: f64, s: State) -> State {
        let cfg = self.config;
        let mean = 0.5 * (s.fluid_l + s.fluid_r);
        let delivery = |fluid: f64| {
            (s.chamber - mean) / cfg.thermal_resistance_sample_chamber
                + (mean - fluid) / cfg.thermal_resistance_differential
        };
        let d_fluid_l = (delivery(s.fluid_l) + self.event_power(true, t)) / self.heat_capacity_l;
        let d_fluid_r = (delivery(s.fluid_r) + self.event_power(false, t)) / self.heat_capacity_r;
        let d_chamber = match cfg.mode {
            Mode::Active => {
                (self.chamber_target - s.chamber) / cfg.thermostat.tracking_time_constant
            }
            Mode::Passive => {
                let from_env =
                    (cfg.environment.temp_at(t) - s.chamber) / cfg.thermal_resistance_chamber_env;
                let to_samples = 2.0 * (s.chamber - mean) / cfg.thermal_resistance_sample_chamber;
                (from_env - to_samples) / cfg.chamber_heat_capacity
            }
        };
        State {
            fluid_l: d_fluid_l,
            fluid_r: d_fluid_r,
            chamber: d_chamber,
        }
    }

    fn rk4_step(&self, t: f64, s: State, h: f64) -> State {
        let k1 = self.derivative(t, s);
        let k2 = self.derivative(t + 0.5 * h, advance(s, k1, 0.5 * h));
        let k3 = self.derivative(t + 0.5 * h, advance(s, k2, 0.5 * h));
        let k4 = self.derivative(t + h, advance(s, k3, h));
        State {
            fluid_l: s.fluid_l
                + h / 6.0 * (k1.fluid_l + 2.0 * k2.fluid_l + 2.0 * k3.fluid_l + k4.fluid_l),
            fluid_r: s.fluid_r
                + h / 6.0 * (k1.fluid_r + 2.0 * k2.fluid_r + 2.0 * k3.fluid_r + k4.fluid_r),
            chamber: s.chamber
                + h / 6.0 * (k1.chamber + 2.0 * k2.chamber + 2.0 * k3.chamber + k4.chamber),
        }
    }
}

fn advance(s: State, d: State, h: f64) -> State {
    State {
        fluid_l: s.fluid_l + h * d.fluid_l,
        fluid_r: s.fluid_r + h * d.fluid_r,
        chamber: s.chamber + h * d.chamber,
    }
}

struct SensorStage {
    noise: Option<Normal<f64>>,
    rngs: [ChaCha8Rng; 5],
    quantum: f64,
}

impl SensorStage {
    fn new(model: &NoiseModel) -> Self {
        let noise = if model.sensor_white_sigma > 0.0 {
            Some(Normal::new(0.0, model.sensor_white_sigma).expect("validated sigma"))
        } else {
            None
        };
        let rngs = [
            stream(model.rng_seed, STREAM_SENSOR_BASE),
            stream(model.rng_seed, STREAM_SENSOR_BASE + 1),
            stream(model.rng_seed, STREAM_SENSOR_BASE + 2),
            stream(model.rng_seed, STREAM_SENSOR_BASE + 3),
            stream(model.rng_seed, STREAM_SENSOR_BASE + 4),
        ];
        SensorStage {
            noise,
            rngs,
            quantum: model.quantization_step,
        }
    }

    /// White noise then quantization to the ADC grid.
    fn read(&mut self, channel: usize, true_value: f64) -> f64 {
        let noisy = match &self.noise {
            Some(dist) => true_value + dist.sample(&mut self.rngs[channel]),
            None => true_value,
        };
        (noisy / self.quantum).round() * self.quantum
    }
}

/// Simulate one measurement attempt, producing a five-channel trace sampled
/// every `config.sample_period` seconds from t = 0 through `config.duration`.
///
/// The attempt is a pure function of the configuration (including the RNG
/// seed) and the event list, so identical inputs give bit-identical traces.
pub fn simulate_attempt(
    config: &CalorimeterConfig,
    events: &[FluctuationEventSpec],
) -> Result<MultiChannelTrace> {
    config.validate()?;
    let substeps = config.substeps_per_sample()?;

    // One calibrated power scale per event so the injected excursion peaks at
    // the requested amplitude in the linearized, noiseless model.
    let mut scaled_events = Vec::with_capacity(events.len());
    for spec in events {
        spec.validate(config)?;
        let scale = events::power_scale(spec, config)?;
        scaled_events.push((spec.clone(), scale));
    }

    // The filling act perturbs each mass once per attempt.
    let mut fill_rng = stream(config.noise.rng_seed, STREAM_FILL);
    let (mass_l, mass_r) = if config.noise.fill_error_sigma > 0.0 {
        let fill = Normal::new(0.0, config.noise.fill_error_sigma).expect("validated sigma");
        let m_l = config.sample_mass_l + fill.sample(&mut fill_rng);
        let m_r = config.sample_mass_r + fill.sample(&mut fill_rng);
        if m_l <= 0.0 || m_r <= 0.0 {
            return Err(Error::InvalidConfig(
                "fill error drove a sample mass non-positive".into(),
            ));
        }
        (m_l, m_r)
    } else {
        (config.sample_mass_l, config.sample_mass_r)
    };

    let mut control_rng = stream(config.noise.rng_seed, STREAM_CONTROL);
    let control_dist = if config.mode == Mode::Active && config.thermostat.control_accuracy > 0.0 {
        Some(
            Uniform::new_inclusive(
                -config.thermostat.control_accuracy,
                config.thermostat.control_accuracy,
            )
            .expect("validated accuracy"),
        )
    } else {
        None
    };

    let mut dynamics = Dynamics {
        config,
        heat_capacity_l: mass_l * config.specific_heat_l() + config.container_heat_capacity,
        heat_capacity_r: mass_r * config.specific_heat_base + config.container_heat_capacity,
        events: &scaled_events,
        chamber_target: 0.0,
    };

    let mut state = State {
        fluid_l: config.initial_temp_l,
        fluid_r: config.initial_temp_r,
        chamber: match config.mode {
            Mode::Active => thermostat_setpoint(&config.thermostat, 0.0),
            Mode::Passive => config.environment.temp_at(0.0),
        },
    };

    let n_samples = (config.duration / config.sample_period).floor() as usize + 1;
    let mut sensors = SensorStage::new(&config.noise);
    let mut fluid_l = Vec::with_capacity(n_samples);
    let mut fluid_r = Vec::with_capacity(n_samples);
    let mut air_1 = Vec::with_capacity(n_samples);
    let mut air_2 = Vec::with_capacity(n_samples);
    let mut env = Vec::with_capacity(n_samples);

    let h = config.sample_period / substeps as f64;
    for k in 0..n_samples {
        let t_sample = k as f64 * config.sample_period;
        fluid_l.push(sensors.read(0, state.fluid_l));
        fluid_r.push(sensors.read(1, state.fluid_r));
        air_1.push(sensors.read(2, state.chamber));
        air_2.push(sensors.read(3, state.chamber));
        env.push(sensors.read(4, config.environment.temp_at(t_sample)));

        if k + 1 == n_samples {
            break;
        }
        // The control deviation is held constant across the sample interval.
        let control_offset = match &control_dist {
            Some(dist) => dist.sample(&mut control_rng),
            None => 0.0,
        };
        for sub in 0..substeps {
            let t = t_sample + sub as f64 * h;
            dynamics.chamber_target = thermostat_setpoint(&config.thermostat, t) + control_offset;
            state = dynamics.rk4_step(t, state, h);
        }
    }

    MultiChannelTrace::new(
        config.sample_period,
        0.0,
        fluid_l,
        fluid_r,
        air_1,
        air_2,
        env,
    )
}
