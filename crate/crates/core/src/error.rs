//! Crate-wide error type.

use crate::signal::TrendModel;

/// Errors produced by simulation, extraction, analysis and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),

    #[error(
        "configuration too stiff: sample period {sample_period} s would need {required} \
         sub-steps per sample (limit {limit})"
    )]
    StiffConfiguration {
        sample_period: f64,
        required: usize,
        limit: usize,
    },

    #[error("event outside trace: {0}")]
    EventOutOfRange(String),

    #[error("event duration {duration} s shorter than 4 sample periods ({min} s)")]
    EventTooShort { duration: f64, min: f64 },

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error(
        "begin temperatures differ by {difference:.4} C (tolerance {tolerance:.4} C); \
         use the type-2 scheme instead"
    )]
    BeginToleranceExceeded { difference: f64, tolerance: f64 },

    #[error("no steady state detected within the trace")]
    NoSteadyState,

    #[error("control list is empty")]
    EmptyControls,

    #[error("delta T of the control channel is zero")]
    ZeroDeltaT,

    #[error("non-physical differential: dt = {dt} with delta T = {delta_t} gives 1 + dt/dT <= 0")]
    NonPhysical { dt: f64, delta_t: f64 },

    #[error("negative sigma: {0}")]
    NegativeSigma(&'static str),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("Levenberg-Marquardt did not converge after {iterations} iterations")]
    LmNonConvergence {
        iterations: usize,
        /// Best parameters found so far.
        best: TrendModel,
    },

    #[error("series too short for requested fit: {0}")]
    SeriesTooShort(String),

    #[error("noise window {window} s shorter than 10 smoothing lengths ({min} s)")]
    NoiseWindowTooShort { window: f64, min: f64 },

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("no environmental extrema found")]
    NoExtrema,

    #[error("all {0} attempts in the batch failed")]
    AllAttemptsFailed(usize),

    #[error("no successful control attempt at mark {0}; cannot calibrate")]
    NoControls(String),

    #[error(
        "paired calibration needs equal counts: {controls} controls, {experimental} experimental"
    )]
    PairingMismatch {
        controls: usize,
        experimental: usize,
    },

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("config line {line}: {message}")]
    ConfigFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
