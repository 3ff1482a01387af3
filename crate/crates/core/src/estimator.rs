//! Differential heat-capacity estimation.
//!
//! The relative change is obtained from the channel-differential temperature
//! dt, the temperature rise of the control channel and the mass ratio k:
//!
//! ```text
//! dC/C = k / (1 + dt / dT_control) - 1
//! ```
//!
//! Type-1 measurements read dt at fixed offsets after the second setpoint
//! and require (nearly) equal begin temperatures; type-2 measurements wait
//! for the differential trace to flatten and read dt in that steady window,
//! tolerating unequal begin temperatures. Control attempts with two
//! unexcited samples calibrate the zero level of dt.

use std::fmt;

use crate::error::{Error, Result};
use crate::signal::{detect_steady_state, SteadyStateCriterion};
use crate::trace::MultiChannelTrace;

/// Whether an attempt carries an excited sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptKind {
    Control,
    Experimental,
}

/// Measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Type1,
    Type2,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Type1 => f.write_str("type1"),
            Protocol::Type2 => f.write_str("type2"),
        }
    }
}

/// Identifies where in the attempt a reading was taken: a fixed offset after
/// the second setpoint (in whole minutes) or the detected steady window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MarkLabel {
    OffsetMin(u32),
    Steady,
}

impl MarkLabel {
    pub fn from_offset_seconds(offset: f64) -> Self {
        MarkLabel::OffsetMin((offset / 60.0).round() as u32)
    }

    pub fn protocol(&self) -> Protocol {
        match self {
            MarkLabel::OffsetMin(_) => Protocol::Type1,
            MarkLabel::Steady => Protocol::Type2,
        }
    }
}

impl fmt::Display for MarkLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkLabel::OffsetMin(m) => write!(f, "{m}min"),
            MarkLabel::Steady => f.write_str("steady"),
        }
    }
}

/// One extracted reading: end temperatures, channel-differential dt and the
/// control-channel rise at that mark.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkReading {
    pub label: MarkLabel,
    pub t_end_l: f64,
    pub t_end_r: f64,
    /// `t_end_l - t_end_r`.
    pub dt: f64,
    /// `t_end_r - t_begin_r`.
    pub delta_t_control: f64,
}

/// Extracted temperatures of one measurement attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub kind: AttemptKind,
    pub t_begin_l: f64,
    pub t_begin_r: f64,
    pub marks: Vec<MarkReading>,
    /// Mass ratio `m_R / m_L` including the container water-equivalent.
    pub k: f64,
}

impl AttemptRecord {
    pub fn mark(&self, label: MarkLabel) -> Option<&MarkReading> {
        self.marks.iter().find(|m| m.label == label)
    }
}

/// Relative heat-capacity estimate with its propagated uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatCapacityEstimate {
    pub value: f64,
    pub sigma: f64,
    pub protocol: Protocol,
    pub mark_label: MarkLabel,
    /// Whether dt was zero-level calibrated against control attempts.
    pub calibrated: bool,
}

/// Mass ratio `k = m_R / m_L`. Masses include container contributions
/// expressed as water-equivalent mass.
pub fn mass_ratio_k(m_l: f64, m_r: f64) -> Result<f64> {
    if !m_l.is_finite() || !m_r.is_finite() {
        return Err(Error::NonFinite("mass"));
    }
    if m_l <= 0.0 || m_r <= 0.0 {
        return Err(Error::InvalidConfig("masses must be > 0".into()));
    }
    Ok(m_r / m_l)
}

/// Windowing parameters shared by both extraction schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionWindows {
    /// Averaging window for the begin temperatures, ending at the step, s.
    pub begin_window: f64,
    /// Half-width of the averaging window around each type-1 mark, s.
    pub mark_half_window: f64,
    /// Averaging window starting at the detected steady time, s.
    pub zone4_window: f64,
}

impl Default for ExtractionWindows {
    fn default() -> Self {
        ExtractionWindows {
            begin_window: 300.0,
            mark_half_window: 60.0,
            zone4_window: 600.0,
        }
    }
}

/// Parameters of a type-1 extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Type1Params {
    /// Time of the second setpoint, s.
    pub step_time: f64,
    /// Mark offsets after the step, s.
    pub mark_offsets: Vec<f64>,
    /// Largest tolerated begin-temperature difference, C. Beyond it the
    /// type-2 scheme must be used.
    pub begin_tolerance: f64,
    pub windows: ExtractionWindows,
    pub k: f64,
}

impl Type1Params {
    pub fn new(step_time: f64) -> Self {
        Type1Params {
            step_time,
            mark_offsets: vec![1800.0, 2700.0, 3600.0],
            begin_tolerance: 0.1,
            windows: ExtractionWindows::default(),
            k: 1.0,
        }
    }
}

/// Parameters of a type-2 extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Type2Params {
    pub step_time: f64,
    pub flatness: SteadyStateCriterion,
    pub windows: ExtractionWindows,
    pub k: f64,
}

impl Type2Params {
    pub fn new(step_time: f64) -> Self {
        Type2Params {
            step_time,
            flatness: SteadyStateCriterion::default(),
            windows: ExtractionWindows::default(),
            k: 1.0,
        }
    }
}

/// Begin temperatures averaged over the pre-step window. Traces that start
/// right at the step fall back to the first `begin_window` seconds.
fn begin_temperatures(
    trace: &MultiChannelTrace,
    step_time: f64,
    window: f64,
) -> Result<(f64, f64)> {
    let (from, to) = if step_time > trace.start_time {
        ((step_time - window).max(trace.start_time), step_time)
    } else {
        (trace.start_time, trace.start_time + window)
    };
    let l = trace
        .series(crate::trace::Channel::FluidL)
        .window_mean(from, to)?;
    let r = trace
        .series(crate::trace::Channel::FluidR)
        .window_mean(from, to)?;
    Ok((l, r))
}

/// Type-1 extraction: readings at fixed offsets after the second setpoint.
pub fn extract_type1(
    trace: &MultiChannelTrace,
    kind: AttemptKind,
    params: &Type1Params,
) -> Result<AttemptRecord> {
    let (t_begin_l, t_begin_r) =
        begin_temperatures(trace, params.step_time, params.windows.begin_window)?;
    let difference = (t_begin_l - t_begin_r).abs();
    if difference > params.begin_tolerance {
        return Err(Error::BeginToleranceExceeded {
            difference,
            tolerance: params.begin_tolerance,
        });
    }

    let max_offset = params
        .mark_offsets
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if params.mark_offsets.is_empty() {
        return Err(Error::InvalidConfig("no mark offsets given".into()));
    }
    if params.step_time + max_offset + params.windows.mark_half_window > trace.end_time() {
        return Err(Error::TraceTooShort(format!(
            "last mark window ends at {:.0} s, trace ends at {:.0} s",
            params.step_time + max_offset + params.windows.mark_half_window,
            trace.end_time()
        )));
    }

    let fluid_l = trace.series(crate::trace::Channel::FluidL);
    let fluid_r = trace.series(crate::trace::Channel::FluidR);
    let mut marks = Vec::with_capacity(params.mark_offsets.len());
    for &offset in &params.mark_offsets {
        let center = params.step_time + offset;
        let from = center - params.windows.mark_half_window;
        let to = center + params.windows.mark_half_window;
        let t_end_l = fluid_l.window_mean(from, to)?;
        let t_end_r = fluid_r.window_mean(from, to)?;
        marks.push(MarkReading {
            label: MarkLabel::from_offset_seconds(offset),
            t_end_l,
            t_end_r,
            dt: t_end_l - t_end_r,
            delta_t_control: t_end_r - t_begin_r,
        });
    }

    Ok(AttemptRecord {
        kind,
        t_begin_l,
        t_begin_r,
        marks,
        k: params.k,
    })
}

/// Type-2 extraction: dt read in the detected zone-4 steady window.
pub fn extract_type2(
    trace: &MultiChannelTrace,
    kind: AttemptKind,
    params: &Type2Params,
) -> Result<AttemptRecord> {
    let (t_begin_l, t_begin_r) =
        begin_temperatures(trace, params.step_time, params.windows.begin_window)?;

    let diff = trace.differential().tail_from(params.step_time);
    let steady_at = detect_steady_state(&diff, &params.flatness).ok_or(Error::NoSteadyState)?;

    let from = steady_at;
    let to = steady_at + params.windows.zone4_window;
    if to > trace.end_time() {
        return Err(Error::TraceTooShort(format!(
            "zone-4 window ends at {to:.0} s, trace ends at {:.0} s",
            trace.end_time()
        )));
    }
    let fluid_l = trace.series(crate::trace::Channel::FluidL);
    let fluid_r = trace.series(crate::trace::Channel::FluidR);
    let t_end_l = fluid_l.window_mean(from, to)?;
    let t_end_r = fluid_r.window_mean(from, to)?;

    Ok(AttemptRecord {
        kind,
        t_begin_l,
        t_begin_r,
        marks: vec![MarkReading {
            label: MarkLabel::Steady,
            t_end_l,
            t_end_r,
            dt: t_end_l - t_end_r,
            delta_t_control: t_end_r - t_begin_r,
        }],
        k: params.k,
    })
}

/// Zero-level calibration: experimental dt minus the mean control dt.
pub fn calibrate_dt(dt_experiment: f64, dt_controls: &[f64]) -> Result<f64> {
    if dt_controls.is_empty() {
        return Err(Error::EmptyControls);
    }
    let mean = dt_controls.iter().sum::<f64>() / dt_controls.len() as f64;
    Ok(dt_experiment - mean)
}

/// The estimation kernel: `dC/C = k / (1 + dt/dT) - 1`.
pub fn dc_over_c(dt: f64, delta_t_control: f64, k: f64) -> Result<f64> {
    if delta_t_control == 0.0 {
        return Err(Error::ZeroDeltaT);
    }
    let ratio = 1.0 + dt / delta_t_control;
    if ratio <= 0.0 {
        return Err(Error::NonPhysical {
            dt,
            delta_t: delta_t_control,
        });
    }
    Ok(k / ratio - 1.0)
}

/// Assemble a full estimate. Sigma starts at zero; attach an error budget
/// with [`HeatCapacityEstimate::with_sigma`].
pub fn estimate_dc_over_c(
    dt: f64,
    delta_t_control: f64,
    k: f64,
    mark_label: MarkLabel,
    calibrated: bool,
) -> Result<HeatCapacityEstimate> {
    Ok(HeatCapacityEstimate {
        value: dc_over_c(dt, delta_t_control, k)?,
        sigma: 0.0,
        protocol: mark_label.protocol(),
        mark_label,
        calibrated,
    })
}

impl HeatCapacityEstimate {
    pub fn with_sigma(mut self, budget: &ErrorBudget) -> Self {
        self.sigma = budget.total;
        self
    }
}

/// First-order error budget of an estimate.
///
/// The four inaccuracy sources map onto the fields as follows: sensor noise
/// and zone-4 dt variation fold into `sigma_dt`; the filling error enters as
/// `sigma_k`; the inhomogeneous temperature distribution has no quantitative
/// model and is carried as a declared, non-propagated component.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    /// Folded dt-side uncertainty (sensor noise and zone-4 variation), C.
    pub sigma_dt: f64,
    /// Mass-ratio uncertainty.
    pub sigma_k: f64,
    /// Declared inhomogeneity allowance, not propagated into `total`.
    pub sigma_inhomogeneity: f64,
    /// `|d(dC/C)/d(dt)| * sigma_dt`.
    pub dt_component: f64,
    /// `|d(dC/C)/dk| * sigma_k`.
    pub k_component: f64,
    /// Root sum of squares of the propagated components.
    pub total: f64,
}

/// Fold independent dt-side sigmas (sensor, zone-4 variation) into one.
pub fn fold_sigma_dt(sigma_sensor: f64, sigma_zone4: f64) -> f64 {
    (sigma_sensor * sigma_sensor + sigma_zone4 * sigma_zone4).sqrt()
}

/// Propagate dt and k uncertainties through the estimation kernel at the
/// operating point `(dt, delta_t_control, k)`.
pub fn error_budget(
    sigma_dt: f64,
    delta_t_control: f64,
    sigma_k: f64,
    dt: f64,
    k: f64,
) -> Result<ErrorBudget> {
    if sigma_dt < 0.0 {
        return Err(Error::NegativeSigma("sigma_dt"));
    }
    if sigma_k < 0.0 {
        return Err(Error::NegativeSigma("sigma_k"));
    }
    if !delta_t_control.is_finite() || delta_t_control <= 0.0 {
        return Err(Error::InvalidConfig(
            "error budget needs delta_t_control > 0".into(),
        ));
    }
    let ratio = 1.0 + dt / delta_t_control;
    if ratio <= 0.0 {
        return Err(Error::NonPhysical {
            dt,
            delta_t: delta_t_control,
        });
    }
    let d_by_dt = k / (delta_t_control * ratio * ratio);
    let d_by_k = 1.0 / ratio;
    let dt_component = d_by_dt * sigma_dt;
    let k_component = d_by_k * sigma_k;
    Ok(ErrorBudget {
        sigma_dt,
        sigma_k,
        sigma_inhomogeneity: 0.0,
        dt_component,
        k_component,
        total: (dt_component * dt_component + k_component * k_component).sqrt(),
    })
}

impl ErrorBudget {
    /// Attach the declared (non-propagated) inhomogeneity component.
    pub fn with_inhomogeneity(mut self, sigma: f64) -> Self {
        self.sigma_inhomogeneity = sigma;
        self
    }
}
