//! Line-oriented run configuration: `section.key = value` with `#` comments.
//!
//! Sections mirror the simulator configuration (`sim.*`, `thermostat.*`,
//! `environment.*`, `noise.*`), the experiment plan (`plan.*`), the
//! steady-state criterion (`steady.*`), the fluctuation detector
//! (`detector.*`) and optional injected events (`event.N.*`). Unknown keys
//! are rejected. Units are fixed: seconds, degrees Celsius, kilograms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{ExperimentPlan, ProtocolChoice};
use crate::signal::FluctuationDetectorParams;
use crate::sim::{CalorimeterConfig, EventShape, FluctuationEventSpec, Mode};
use crate::trace::Channel;

/// Parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sim: CalorimeterConfig,
    pub plan: ExperimentPlan,
    pub detector: FluctuationDetectorParams,
    pub events: Vec<FluctuationEventSpec>,
}

#[derive(Default)]
struct PartialEvent {
    channel: Option<Channel>,
    start: Option<f64>,
    duration: Option<f64>,
    amplitude: Option<f64>,
    shape: Option<EventShape>,
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigFormat {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| bad(line, format!("{key}: expected a number, got '{value}'")))
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| bad(line, format!("{key}: expected an integer, got '{value}'")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| bad(line, format!("{key}: expected a count, got '{value}'")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(line, format!("{key}: expected true or false"))),
    }
}

fn parse_steps(line: usize, value: &str) -> Result<Vec<(f64, f64)>> {
    let mut steps = Vec::new();
    for part in value.split(',') {
        let (t, sp) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| bad(line, "thermostat.steps: expected 'time:setpoint' pairs"))?;
        steps.push((
            parse_f64(line, "thermostat.steps", t.trim())?,
            parse_f64(line, "thermostat.steps", sp.trim())?,
        ));
    }
    Ok(steps)
}

fn parse_offsets(line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|p| parse_f64(line, "plan.mark_offsets", p.trim()))
        .collect()
}

/// Parse a run configuration from text.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut sim = CalorimeterConfig::default_active();
    let mut plan_overrides: Vec<(usize, String, String)> = Vec::new();
    let mut detector = FluctuationDetectorParams::default();
    let mut events: BTreeMap<u32, PartialEvent> = BTreeMap::new();

    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, "expected 'section.key = value'"))?;
        let key = key.trim();
        let value = value.trim();

        if let Some(event_key) = key.strip_prefix("event.") {
            let (id, field) = event_key
                .split_once('.')
                .ok_or_else(|| bad(line_no, "expected 'event.<n>.<field>'"))?;
            let id: u32 = id
                .parse()
                .map_err(|_| bad(line_no, "event index must be an integer"))?;
            let entry = events.entry(id).or_default();
            match field {
                "channel" => {
                    entry.channel = Some(
                        value
                            .parse::<Channel>()
                            .map_err(|e| bad(line_no, format!("event channel: {e}")))?,
                    )
                }
                "start" => entry.start = Some(parse_f64(line_no, key, value)?),
                "duration" => entry.duration = Some(parse_f64(line_no, key, value)?),
                "amplitude" => entry.amplitude = Some(parse_f64(line_no, key, value)?),
                "shape" => {
                    entry.shape = Some(match value {
                        "gaussian_bump" => EventShape::GaussianBump,
                        "raised_cosine" => EventShape::RaisedCosine,
                        other => {
                            return Err(bad(line_no, format!("unknown event shape '{other}'")))
                        }
                    })
                }
                other => return Err(bad(line_no, format!("unknown event field '{other}'"))),
            }
            continue;
        }

        match key {
            "sim.mode" => {
                sim.mode = match value {
                    "active" => Mode::Active,
                    "passive" => Mode::Passive,
                    other => return Err(bad(line_no, format!("unknown mode '{other}'"))),
                }
            }
            "sim.sample_mass_l" => sim.sample_mass_l = parse_f64(line_no, key, value)?,
            "sim.sample_mass_r" => sim.sample_mass_r = parse_f64(line_no, key, value)?,
            "sim.specific_heat_base" => sim.specific_heat_base = parse_f64(line_no, key, value)?,
            "sim.dc_over_c_injected" => sim.dc_over_c_injected = parse_f64(line_no, key, value)?,
            "sim.container_heat_capacity" => {
                sim.container_heat_capacity = parse_f64(line_no, key, value)?
            }
            "sim.thermal_resistance_sample_chamber" => {
                sim.thermal_resistance_sample_chamber = parse_f64(line_no, key, value)?;
            }
            "sim.thermal_resistance_differential" => {
                sim.thermal_resistance_differential = parse_f64(line_no, key, value)?
            }
            "sim.thermal_resistance_chamber_env" => {
                sim.thermal_resistance_chamber_env = parse_f64(line_no, key, value)?
            }
            "sim.chamber_heat_capacity" => {
                sim.chamber_heat_capacity = parse_f64(line_no, key, value)?
            }
            "sim.initial_temp_l" => sim.initial_temp_l = parse_f64(line_no, key, value)?,
            "sim.initial_temp_r" => sim.initial_temp_r = parse_f64(line_no, key, value)?,
            "sim.sample_period" => sim.sample_period = parse_f64(line_no, key, value)?,
            "sim.duration" => sim.duration = parse_f64(line_no, key, value)?,
            "thermostat.steps" => sim.thermostat.steps = parse_steps(line_no, value)?,
            "thermostat.tracking_time_constant" => {
                sim.thermostat.tracking_time_constant = parse_f64(line_no, key, value)?
            }
            "thermostat.control_accuracy" => {
                sim.thermostat.control_accuracy = parse_f64(line_no, key, value)?
            }
            "environment.mean_temp" => sim.environment.mean_temp = parse_f64(line_no, key, value)?,
            "environment.circadian_amplitude" => {
                sim.environment.circadian_amplitude = parse_f64(line_no, key, value)?
            }
            "environment.circadian_period" => {
                sim.environment.circadian_period = parse_f64(line_no, key, value)?
            }
            "environment.slow_drift_rate" => {
                sim.environment.slow_drift_rate = parse_f64(line_no, key, value)?
            }
            "noise.sensor_white_sigma" => {
                sim.noise.sensor_white_sigma = parse_f64(line_no, key, value)?
            }
            "noise.quantization_step" => {
                sim.noise.quantization_step = parse_f64(line_no, key, value)?
            }
            "noise.fill_error_sigma" => {
                sim.noise.fill_error_sigma = parse_f64(line_no, key, value)?
            }
            "noise.rng_seed" => sim.noise.rng_seed = parse_u64(line_no, key, value)?,
            "steady.window" | "steady.slope_threshold" | "steady.hold" => {
                plan_overrides.push((line_no, key.to_string(), value.to_string()));
            }
            "detector.noise_window" => detector.noise_window = parse_f64(line_no, key, value)?,
            "detector.threshold_factor" => {
                detector.threshold_factor = parse_f64(line_no, key, value)?
            }
            "detector.min_duration" => detector.min_duration = parse_f64(line_no, key, value)?,
            "detector.max_duration" => detector.max_duration = parse_f64(line_no, key, value)?,
            "detector.smoothing" => detector.smoothing = parse_f64(line_no, key, value)?,
            "detector.merge_gap" => detector.merge_gap = parse_f64(line_no, key, value)?,
            _ if key.starts_with("plan.") => {
                plan_overrides.push((line_no, key.to_string(), value.to_string()));
            }
            other => return Err(bad(line_no, format!("unknown key '{other}'"))),
        }
    }

    // The plan wraps the simulator config, so apply its overrides second.
    let mut plan = ExperimentPlan::new(sim.clone());
    for (line_no, key, value) in plan_overrides {
        let value = value.as_str();
        match key.as_str() {
            "plan.profile_label" => plan.profile_label = value.to_string(),
            "plan.n_control" => plan.n_control = parse_usize(line_no, &key, value)?,
            "plan.n_experimental" => plan.n_experimental = parse_usize(line_no, &key, value)?,
            "plan.injected_dc_over_c" => plan.injected_dc_over_c = parse_f64(line_no, &key, value)?,
            "plan.protocol" => {
                plan.protocol = match value {
                    "type1" => ProtocolChoice::Type1,
                    "type2" => ProtocolChoice::Type2,
                    "both" => ProtocolChoice::Both,
                    other => return Err(bad(line_no, format!("unknown protocol '{other}'"))),
                }
            }
            "plan.mark_offsets" => plan.mark_offsets = parse_offsets(line_no, value)?,
            "plan.seed_base" => plan.seed_base = parse_u64(line_no, &key, value)?,
            "plan.pair_calibration" => plan.pair_calibration = parse_bool(line_no, &key, value)?,
            "plan.handling_time" => plan.handling_time = parse_f64(line_no, &key, value)?,
            "steady.window" => plan.flatness.window = parse_f64(line_no, &key, value)?,
            "steady.slope_threshold" => {
                plan.flatness.slope_threshold = parse_f64(line_no, &key, value)?
            }
            "steady.hold" => plan.flatness.hold = parse_usize(line_no, &key, value)?,
            other => return Err(bad(line_no, format!("unknown key '{other}'"))),
        }
    }

    let mut event_specs = Vec::new();
    for (id, partial) in events {
        let spec = FluctuationEventSpec {
            channel: partial
                .channel
                .ok_or_else(|| bad(0, format!("event.{id} is missing 'channel'")))?,
            start: partial
                .start
                .ok_or_else(|| bad(0, format!("event.{id} is missing 'start'")))?,
            duration: partial
                .duration
                .ok_or_else(|| bad(0, format!("event.{id} is missing 'duration'")))?,
            amplitude: partial
                .amplitude
                .ok_or_else(|| bad(0, format!("event.{id} is missing 'amplitude'")))?,
            shape: partial.shape.unwrap_or(EventShape::GaussianBump),
        };
        event_specs.push(spec);
    }

    sim.validate()?;
    Ok(RunConfig {
        sim,
        plan,
        detector,
        events: event_specs,
    })
}

/// Read and parse a run configuration file.
pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_run_config(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# Table-1 style scenario
sim.mode = active
sim.sample_mass_l = 0.015
sim.duration = 10800          # 3 h attempt
thermostat.steps = 0:22, 1800:24
noise.rng_seed = 7
plan.protocol = type2
plan.n_control = 4
plan.n_experimental = 6
plan.injected_dc_over_c = 0.0208
steady.hold = 2
detector.threshold_factor = 5
event.1.channel = fluid_L
event.1.start = 3600
event.1.duration = 1800
event.1.amplitude = 0.0015
";
        let cfg = parse_run_config(text).unwrap();
        assert_eq!(cfg.sim.noise.rng_seed, 7);
        assert_eq!(cfg.sim.thermostat.steps, vec![(0.0, 22.0), (1800.0, 24.0)]);
        assert_eq!(cfg.plan.n_experimental, 6);
        assert_eq!(cfg.plan.flatness.hold, 2);
        assert_eq!(cfg.detector.threshold_factor, 5.0);
        assert_eq!(cfg.events.len(), 1);
        assert_eq!(cfg.events[0].amplitude, 0.0015);
        assert!(matches!(cfg.plan.protocol, ProtocolChoice::Type2));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = parse_run_config("sim.voltage = 5\n").unwrap_err();
        match err {
            Error::ConfigFormat { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("unknown key"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn incomplete_events_are_rejected() {
        let err = parse_run_config("event.1.start = 100\n").unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn defaults_survive_an_empty_config() {
        let cfg = parse_run_config("").unwrap();
        assert_eq!(cfg.sim, CalorimeterConfig::default_active());
        assert!(cfg.events.is_empty());
    }
}
