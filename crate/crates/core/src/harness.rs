//! Batch orchestration: simulate control and experimental attempts, extract
//! per protocol, calibrate the zero level against the controls and summarize
//! as mean and standard deviation per (protocol, mark) row.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    dc_over_c, extract_type1, extract_type2, AttemptKind, AttemptRecord, ExtractionWindows,
    MarkLabel, Protocol, Type1Params, Type2Params,
};
use crate::signal::SteadyStateCriterion;
use crate::sim::{simulate_attempt, CalorimeterConfig};

/// Which extraction schemes a batch runs on every attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolChoice {
    Type1,
    Type2,
    Both,
}

impl ProtocolChoice {
    pub fn runs_type1(self) -> bool {
        matches!(self, ProtocolChoice::Type1 | ProtocolChoice::Both)
    }

    pub fn runs_type2(self) -> bool {
        matches!(self, ProtocolChoice::Type2 | ProtocolChoice::Both)
    }
}

/// A full experiment: paired control and experimental attempt batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base_config: CalorimeterConfig,
    /// Free-text profile label carried into reports, e.g. "22->24".
    pub profile_label: String,
    pub n_control: usize,
    pub n_experimental: usize,
    /// dC/C applied to the left channel of experimental attempts.
    pub injected_dc_over_c: f64,
    pub protocol: ProtocolChoice,
    /// Type-1 mark offsets after the second setpoint, s.
    pub mark_offsets: Vec<f64>,
    pub flatness: SteadyStateCriterion,
    pub windows: ExtractionWindows,
    /// Attempt seeds are `seed_base + attempt index`.
    pub seed_base: u64,
    /// Calibrate each experimental attempt against its paired control
    /// instead of the control mean. Requires equal batch sizes.
    pub pair_calibration: bool,
    /// Handling and zone-1 span between excitation and the second setpoint,
    /// reported as "time after excitation" alongside mark offsets, s.
    pub handling_time: f64,
}

impl ExperimentPlan {
    pub fn new(base_config: CalorimeterConfig) -> Self {
        ExperimentPlan {
            base_config,
            profile_label: String::new(),
            n_control: 5,
            n_experimental: 5,
            injected_dc_over_c: 0.0,
            protocol: ProtocolChoice::Both,
            mark_offsets: vec![1800.0, 2700.0, 3600.0],
            flatness: SteadyStateCriterion::default(),
            windows: ExtractionWindows::default(),
            seed_base: 1,
            pair_calibration: false,
            handling_time: 1200.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_control == 0 || self.n_experimental == 0 {
            return Err(Error::InvalidConfig(
                "plan needs at least one attempt per arm".into(),
            ));
        }
        if self.injected_dc_over_c <= -1.0 {
            return Err(Error::InvalidConfig(
                "injected_dc_over_c must be > -1".into(),
            ));
        }
        if self.protocol.runs_type1() && self.mark_offsets.is_empty() {
            return Err(Error::InvalidConfig(
                "type-1 protocol needs mark offsets".into(),
            ));
        }
        if self.pair_calibration && self.n_control != self.n_experimental {
            return Err(Error::PairingMismatch {
                controls: self.n_control,
                experimental: self.n_experimental,
            });
        }
        self.base_config.validate()
    }
}

/// One failed extraction, recorded without aborting the batch.
#[derive(Debug, Clone)]
pub struct AttemptFailure {
    pub attempt_index: usize,
    pub kind: AttemptKind,
    pub protocol: Protocol,
    pub message: String,
}

/// Mean and standard deviation of the batch at one (protocol, mark) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub protocol: Protocol,
    pub mark: MarkLabel,
    pub n: usize,
    pub delta_t_mean: f64,
    pub delta_t_std: f64,
    /// Calibrated dt statistics.
    pub dt_mean: f64,
    pub dt_std: f64,
    pub dc_over_c_mean: f64,
    pub dc_over_c_std: f64,
    /// Mark time measured from excitation, including handling, s.
    pub time_after_excitation: Option<f64>,
}

/// Rows keyed by (protocol, mark), type-1 marks first in offset order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, protocol: Protocol, mark: MarkLabel) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.protocol == protocol && r.mark == mark)
    }
}

/// Everything a batch produces.
#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Successful extractions, controls first, in attempt order.
    pub records: Vec<AttemptRecord>,
    pub failures: Vec<AttemptFailure>,
    pub summary: SummaryTable,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

struct AttemptOutput {
    records: Vec<AttemptRecord>,
    failures: Vec<AttemptFailure>,
}

fn run_attempt(plan: &ExperimentPlan, index: usize, kind: AttemptKind) -> AttemptOutput {
    let mut config = plan.base_config.clone();
    config.noise.rng_seed = plan.seed_base + index as u64;
    config.dc_over_c_injected = match kind {
        AttemptKind::Control => 0.0,
        AttemptKind::Experimental => plan.injected_dc_over_c,
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let trace = match simulate_attempt(&config, &[]) {
        Ok(trace) => trace,
        Err(err) => {
            for protocol in [Protocol::Type1, Protocol::Type2] {
                failures.push(AttemptFailure {
                    attempt_index: index,
                    kind,
                    protocol,
                    message: err.to_string(),
                });
            }
            return AttemptOutput { records, failures };
        }
    };

    let step_time = config.thermostat.measurement_step_time();
    let k = config.nominal_mass_ratio();

    if plan.protocol.runs_type1() {
        let params = Type1Params {
            step_time,
            mark_offsets: plan.mark_offsets.clone(),
            begin_tolerance: 0.1,
            windows: plan.windows.clone(),
            k,
        };
        match extract_type1(&trace, kind, &params) {
            Ok(record) => records.push(record),
            Err(err) => failures.push(AttemptFailure {
                attempt_index: index,
                kind,
                protocol: Protocol::Type1,
                message: err.to_string(),
            }),
        }
    }
    if plan.protocol.runs_type2() {
        let params = Type2Params {
            step_time,
            flatness: plan.flatness.clone(),
            windows: plan.windows.clone(),
            k,
        };
        match extract_type2(&trace, kind, &params) {
            Ok(record) => records.push(record),
            Err(err) => failures.push(AttemptFailure {
                attempt_index: index,
                kind,
                protocol: Protocol::Type2,
                message: err.to_string(),
            }),
        }
    }

    AttemptOutput { records, failures }
}

/// Run the full batch: simulate both arms, extract, calibrate, summarize.
///
/// Extraction failures are recorded per attempt; the batch only fails when
/// every attempt failed or when calibration is impossible at a mark that has
/// experimental readings.
pub fn run_batch(plan: &ExperimentPlan) -> Result<BatchResult> {
    plan.validate()?;

    let jobs: Vec<(usize, AttemptKind)> = (0..plan.n_control)
        .map(|i| (i, AttemptKind::Control))
        .chain((0..plan.n_experimental).map(|j| (plan.n_control + j, AttemptKind::Experimental)))
        .collect();

    // Attempts are independent simulations with derived seeds, so they can
    // run in parallel; collecting preserves attempt order.
    let outputs: Vec<AttemptOutput> = jobs
        .par_iter()
        .map(|&(index, kind)| run_attempt(plan, index, kind))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for output in outputs {
        records.extend(output.records);
        failures.extend(output.failures);
    }
    if records.is_empty() {
        return Err(Error::AllAttemptsFailed(jobs.len()));
    }

    // Mark labels in reporting order: type-1 offsets first, then steady.
    let mut labels: Vec<MarkLabel> = Vec::new();
    if plan.protocol.runs_type1() {
        let mut offsets = plan.mark_offsets.clone();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        labels.extend(offsets.iter().map(|&o| MarkLabel::from_offset_seconds(o)));
    }
    if plan.protocol.runs_type2() {
        labels.push(MarkLabel::Steady);
    }

    let controls: Vec<&AttemptRecord> = records
        .iter()
        .filter(|r| r.kind == AttemptKind::Control)
        .collect();
    let experiments: Vec<&AttemptRecord> = records
        .iter()
        .filter(|r| r.kind == AttemptKind::Experimental)
        .collect();

    let mut rows = Vec::new();
    for label in labels {
        let control_dts: Vec<f64> = controls
            .iter()
            .filter_map(|r| r.mark(label).map(|m| m.dt))
            .collect();
        let experimental: Vec<(&&AttemptRecord, &crate::estimator::MarkReading)> = experiments
            .iter()
            .filter_map(|r| r.mark(label).map(|m| (r, m)))
            .collect();
        if experimental.is_empty() {
            continue;
        }
        if control_dts.is_empty() {
            return Err(Error::NoControls(label.to_string()));
        }
        let control_mean = control_dts.iter().sum::<f64>() / control_dts.len() as f64;

        let mut delta_ts = Vec::with_capacity(experimental.len());
        let mut dts = Vec::with_capacity(experimental.len());
        let mut estimates = Vec::with_capacity(experimental.len());
        for (slot, (record, mark)) in experimental.iter().enumerate() {
            let dt_calibrated = if plan.pair_calibration {
                match control_dts.get(slot) {
                    Some(paired) => mark.dt - paired,
                    None => mark.dt - control_mean,
                }
            } else {
                mark.dt - control_mean
            };
            delta_ts.push(mark.delta_t_control);
            dts.push(dt_calibrated);
            if let Ok(value) = dc_over_c(dt_calibrated, mark.delta_t_control, record.k) {
                estimates.push(value);
            }
        }

        let (delta_t_mean, delta_t_std) = mean_and_std(&delta_ts);
        let (dt_mean, dt_std) = mean_and_std(&dts);
        let (dc_mean, dc_std) = mean_and_std(&estimates);
        rows.push(SummaryRow {
            protocol: label.protocol(),
            mark: label,
            n: experimental.len(),
            delta_t_mean,
            delta_t_std,
            dt_mean,
            dt_std,
            dc_over_c_mean: dc_mean,
            dc_over_c_std: dc_std,
            time_after_excitation: match label {
                MarkLabel::OffsetMin(minutes) => Some(plan.handling_time + minutes as f64 * 60.0),
                MarkLabel::Steady => None,
            },
        });
    }

    Ok(BatchResult {
        records,
        failures,
        summary: SummaryTable { rows },
    })
}

/// Recovery check of a summary against the known injected value.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub protocol: Protocol,
    pub mark: MarkLabel,
    pub bias: f64,
    /// Bias in units of the standard error of the mean.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Compare each summary row's mean against the true injected value with a
/// three-standard-error criterion.
pub fn recovery_report(true_value: f64, summary: &SummaryTable) -> RecoveryReport {
    let rows = summary
        .rows
        .iter()
        .map(|row| {
            let bias = row.dc_over_c_mean - true_value;
            let se = row.dc_over_c_std / (row.n as f64).sqrt();
            let z = if se > 0.0 {
                bias / se
            } else if bias == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            RecoveryRow {
                protocol: row.protocol,
                mark: row.mark,
                bias,
                z,
                pass: z.abs() < 3.0,
            }
        })
        .collect();
    RecoveryReport { rows }
}
