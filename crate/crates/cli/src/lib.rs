//! The `diffcal` command line: simulate attempts, analyze traces, detect
//! fluctuations, run batches, estimate lead/lag and plot channels.
//!
//! Numeric results go to stdout (or `--out`) as CSV. Errors print a single
//! machine-parseable line `error[CODE]: message` on stderr; exit status is
//! 0 on success, 1 on data or protocol errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use diffcal_core::estimator::{
    calibrate_dt, dc_over_c, extract_type1, extract_type2, AttemptKind, AttemptRecord, Protocol,
    Type1Params, Type2Params,
};
use diffcal_core::harness::{recovery_report, run_batch};
use diffcal_core::io::{read_run_config, read_trace_file, write_svg_plot, write_trace_file};
use diffcal_core::signal::{
    detect_fluctuations, detrend, fit_trend, lead_lag, FluctuationDetectorParams, SeriesLabel,
    TrendKind,
};
use diffcal_core::trace::{Channel, MultiChannelTrace, TimeSeries};
use diffcal_core::Error as CoreError;

/// Environment variable overriding the configured simulation seed.
const SEED_ENV_VAR: &str = "DIFFCAL_SEED";

#[derive(Parser)]
#[command(
    name = "diffcal",
    version,
    about = "Differential calorimetry simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one measurement attempt and write the trace CSV.
    Simulate(SimulateArgs),
    /// Extract differential temperatures and estimate dC/C from a trace.
    Analyze(AnalyzeArgs),
    /// Detrend a channel and detect mesoscale fluctuations.
    Detect(DetectArgs),
    /// Run a control/experimental batch from a run configuration.
    Batch(BatchArgs),
    /// Estimate the differential lag against the environment channel.
    Leadlag(LeadlagArgs),
    /// Render selected channels to a static SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Seed override (beats DIFFCAL_SEED and the config value).
    #[arg(long)]
    seed: Option<u64>,
    /// Output trace file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Measurement protocol: type1 or type2.
    #[arg(long)]
    protocol: String,
    /// Time of the second setpoint within the trace, s.
    #[arg(long, default_value_t = 0.0)]
    step_time: f64,
    /// Type-1 mark offsets after the step, minutes.
    #[arg(long, default_value = "30,45,60")]
    marks: String,
    /// Mass ratio m_R / m_L (container water-equivalent included).
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Control trace(s) for zero-level calibration; may repeat.
    #[arg(long)]
    controls: Vec<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Input trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Trend to remove first: linear, poly:<degree> or exp.
    #[arg(long, default_value = "linear")]
    detrend: String,
    /// Series to analyze: diff, fluid_L, fluid_R, air_1, air_2 or env.
    #[arg(long, default_value = "diff")]
    channel: String,
    /// Quiet leading span used for the baseline sigma, s.
    #[arg(long, default_value_t = 7200.0)]
    noise_window: f64,
    /// Event threshold in baseline sigmas.
    #[arg(long, default_value_t = 4.0)]
    threshold_factor: f64,
    /// Accepted event duration band, s.
    #[arg(long, default_value_t = 600.0)]
    min_duration: f64,
    #[arg(long, default_value_t = 3600.0)]
    max_duration: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Run configuration with a plan section.
    #[arg(long)]
    config: PathBuf,
    /// Summary table CSV destination.
    #[arg(long)]
    out_summary: PathBuf,
}

#[derive(Args)]
struct LeadlagArgs {
    /// Input trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Largest lag magnitude searched, s.
    #[arg(long)]
    max_lag: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Input trace file.
    #[arg(long)]
    trace: PathBuf,
    /// SVG destination.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated series: channel names and/or diff.
    #[arg(long, default_value = "fluid_L,fluid_R,air_1,air_2,env")]
    channels: String,
}

/// Usage-level failure (exit 2) distinct from data errors (exit 1).
#[derive(Debug)]
struct UsageError(String);

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

fn error_code(e: &CoreError) -> &'static str {
    match e {
        CoreError::Io(_) => "E_IO",
        CoreError::TraceFormat(_) | CoreError::ConfigFormat { .. } => "E_PARSE",
        CoreError::BeginToleranceExceeded { .. }
        | CoreError::NoSteadyState
        | CoreError::EmptyControls
        | CoreError::NoControls(_) => "E_PROTOCOL",
        _ => "E_DATA",
    }
}

/// Run the CLI on the given arguments and return the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return 0;
            }
            let text = err.to_string();
            let first_line = text.lines().next().unwrap_or("bad usage");
            let first_line = first_line.strip_prefix("error: ").unwrap_or(first_line);
            eprintln!("error[E_USAGE]: {first_line}");
            return 2;
        }
    };

    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Leadlag(args) => cmd_leadlag(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("error[E_USAGE]: {message}");
            2
        }
        Err(CliError::Core(err)) => {
            eprintln!("error[{}]: {err}", error_code(&err));
            1
        }
    }
}

/// Write CSV text to `--out` or stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut writer = BufWriter::new(File::create(path).map_err(CoreError::Io)?);
            writer.write_all(text.as_bytes()).map_err(CoreError::Io)?;
            writer.flush().map_err(CoreError::Io)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config = read_run_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.sim.noise.rng_seed = seed;
    } else if let Ok(value) = std::env::var(SEED_ENV_VAR) {
        let seed: u64 = value
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV_VAR} must be an integer, got '{value}'")))?;
        config.sim.noise.rng_seed = seed;
    }
    let trace = diffcal_core::sim::simulate_attempt(&config.sim, &config.events)?;
    write_trace_file(&trace, &args.out)?;
    Ok(())
}

fn parse_protocol(value: &str) -> Result<Protocol, UsageError> {
    match value {
        "type1" => Ok(Protocol::Type1),
        "type2" => Ok(Protocol::Type2),
        other => Err(UsageError(format!(
            "unknown protocol '{other}', expected type1 or type2"
        ))),
    }
}

fn parse_marks_minutes(value: &str) -> Result<Vec<f64>, UsageError> {
    value
        .split(',')
        .map(|m| {
            m.trim()
                .parse::<f64>()
                .map(|minutes| minutes * 60.0)
                .map_err(|_| UsageError(format!("bad mark '{m}', expected minutes")))
        })
        .collect()
}

fn analyze_one(
    trace: &MultiChannelTrace,
    protocol: Protocol,
    kind: AttemptKind,
    mark_offsets: &[f64],
    args: &AnalyzeArgs,
) -> Result<AttemptRecord, CoreError> {
    match protocol {
        Protocol::Type1 => {
            let params = Type1Params {
                step_time: args.step_time,
                mark_offsets: mark_offsets.to_vec(),
                k: args.k,
                ..Type1Params::new(args.step_time)
            };
            extract_type1(trace, kind, &params)
        }
        Protocol::Type2 => {
            let params = Type2Params {
                step_time: args.step_time,
                k: args.k,
                ..Type2Params::new(args.step_time)
            };
            extract_type2(trace, kind, &params)
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let protocol = parse_protocol(&args.protocol)?;
    let mark_offsets = parse_marks_minutes(&args.marks)?;
    let trace = read_trace_file(&args.trace)?;
    let record = analyze_one(
        &trace,
        protocol,
        AttemptKind::Experimental,
        &mark_offsets,
        &args,
    )?;

    let mut control_records = Vec::new();
    for path in &args.controls {
        let control_trace = read_trace_file(path)?;
        control_records.push(analyze_one(
            &control_trace,
            protocol,
            AttemptKind::Control,
            &mark_offsets,
            &args,
        )?);
    }

    let mut csv = String::from(
        "protocol,mark,t_begin_l,t_begin_r,t_end_l,t_end_r,delta_t_control,\
         dt_raw,dt_calibrated,k,dc_over_c,calibrated\n",
    );
    for mark in &record.marks {
        let dt_calibrated = if control_records.is_empty() {
            mark.dt
        } else {
            let control_dts: Vec<f64> = control_records
                .iter()
                .filter_map(|r| r.mark(mark.label).map(|m| m.dt))
                .collect();
            calibrate_dt(mark.dt, &control_dts)?
        };
        let estimate = dc_over_c(dt_calibrated, mark.delta_t_control, record.k)?;
        csv.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            protocol,
            mark.label,
            record.t_begin_l,
            record.t_begin_r,
            mark.t_end_l,
            mark.t_end_r,
            mark.delta_t_control,
            mark.dt,
            dt_calibrated,
            record.k,
            estimate,
            !control_records.is_empty(),
        ));
    }
    emit(&args.out, &csv)
}

fn parse_series_label(value: &str) -> Result<SeriesLabel, UsageError> {
    if value == "diff" {
        return Ok(SeriesLabel::Diff);
    }
    value
        .parse::<Channel>()
        .map(SeriesLabel::Single)
        .map_err(|_| {
            UsageError(format!(
                "unknown channel '{value}', expected diff, fluid_L, fluid_R, air_1, air_2 or env"
            ))
        })
}

fn parse_trend_kind(value: &str) -> Result<TrendKind, UsageError> {
    match value {
        "linear" => Ok(TrendKind::Linear),
        "exp" => Ok(TrendKind::ExpApproach),
        other => match other.strip_prefix("poly:") {
            Some(degree) => degree
                .parse::<usize>()
                .map(TrendKind::Polynomial)
                .map_err(|_| UsageError(format!("bad polynomial degree '{degree}'"))),
            None => Err(UsageError(format!(
                "unknown trend '{other}', expected linear, poly:<degree> or exp"
            ))),
        },
    }
}

fn select_series(trace: &MultiChannelTrace, label: SeriesLabel) -> TimeSeries {
    match label {
        SeriesLabel::Diff => trace.differential(),
        SeriesLabel::Single(ch) => trace.series(ch),
    }
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let label = parse_series_label(&args.channel)?;
    let kind = parse_trend_kind(&args.detrend)?;
    let trace = read_trace_file(&args.trace)?;
    let series = select_series(&trace, label);
    let model = fit_trend(&series, kind)?;
    let residual = detrend(&series, &model);
    let params = FluctuationDetectorParams {
        noise_window: args.noise_window,
        threshold_factor: args.threshold_factor,
        min_duration: args.min_duration,
        max_duration: args.max_duration,
        channel: label,
        ..FluctuationDetectorParams::default()
    };
    let events = detect_fluctuations(&residual, &params)?;

    let mut csv = String::from("channel,start_s,duration_s,peak_amplitude_c,polarity\n");
    for event in &events {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{}\n",
            event.channel, event.start, event.duration, event.peak_amplitude, event.polarity
        ));
    }
    emit(&args.out, &csv)
}

fn cmd_batch(args: BatchArgs) -> Result<(), CliError> {
    let config = read_run_config(&args.config)?;
    let result = run_batch(&config.plan)?;

    let mut summary_csv = String::from(
        "protocol,mark,n,delta_t_mean,delta_t_std,dt_mean,dt_std,\
         dc_over_c_mean,dc_over_c_std,time_after_excitation_s\n",
    );
    for row in &result.summary.rows {
        let after = row
            .time_after_excitation
            .map(|t| format!("{t:.0}"))
            .unwrap_or_default();
        summary_csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            row.protocol,
            row.mark,
            row.n,
            row.delta_t_mean,
            row.delta_t_std,
            row.dt_mean,
            row.dt_std,
            row.dc_over_c_mean,
            row.dc_over_c_std,
            after,
        ));
    }
    emit(&Some(args.out_summary), &summary_csv)?;

    // Recovery against the injected value goes to stdout.
    let report = recovery_report(config.plan.injected_dc_over_c, &result.summary);
    let mut csv = String::from("protocol,mark,bias,z,pass\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{:.6},{:.4},{}\n",
            row.protocol, row.mark, row.bias, row.z, row.pass
        ));
    }
    print!("{csv}");
    if !result.failures.is_empty() {
        eprintln!(
            "note: {} of {} extractions failed",
            result.failures.len(),
            result.failures.len() + result.records.len()
        );
    }
    Ok(())
}

fn cmd_leadlag(args: LeadlagArgs) -> Result<(), CliError> {
    let trace = read_trace_file(&args.trace)?;
    let env = trace.series(Channel::Env);
    let diff = trace.differential();
    let estimates = lead_lag(&env, &diff, args.max_lag)?;

    let mut csv = String::from("peak_time_s,lag_s,correlation,reliable\n");
    for est in &estimates {
        csv.push_str(&format!(
            "{:.6},{:.6},{:.6},{}\n",
            est.peak_time, est.lag, est.correlation, est.reliable
        ));
    }
    emit(&args.out, &csv)
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let trace = read_trace_file(&args.trace)?;
    let labels = args
        .channels
        .split(',')
        .map(|c| parse_series_label(c.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if labels.is_empty() {
        return Err(UsageError("no channels selected".into()).into());
    }
    let mut writer = BufWriter::new(File::create(&args.out).map_err(CoreError::Io)?);
    write_svg_plot(&trace, &labels, &mut writer)?;
    writer.flush().map_err(CoreError::Io)?;
    Ok(())
}
