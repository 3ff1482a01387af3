//! Integration tests driving the `diffcal` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn diffcal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffcal"))
}

fn run(args: &[&str]) -> Output {
    diffcal().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Null scenario small enough for quick CLI runs: step at 900 s, isolated
/// channels, 2 h attempt.
const NULL_CONFIG: &str = "\
sim.mode = active
thermostat.steps = 0:22, 900:24
sim.thermal_resistance_differential = 1e6
sim.container_heat_capacity = 0.001
sim.duration = 7200
noise.rng_seed = 11
";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_then_analyze_null_gives_near_zero_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "null.conf", NULL_CONFIG);
    let trace = dir.path().join("trace.csv");

    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(sim.status.success(), "stderr: {}", stderr(&sim));

    let analyze = run(&[
        "analyze",
        "--trace",
        trace.to_str().unwrap(),
        "--protocol",
        "type2",
        "--step-time",
        "900",
    ]);
    assert!(analyze.status.success(), "stderr: {}", stderr(&analyze));
    let text = stdout(&analyze);
    let row = text.lines().nth(1).expect("one data row");
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "type2");
    assert_eq!(fields[1], "steady");
    let estimate: f64 = fields[10].parse().unwrap();
    assert!(estimate.abs() < 0.005, "null estimate {estimate}");
}

#[test]
fn analyze_with_controls_calibrates_the_zero_level() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "null.conf", NULL_CONFIG);
    let experimental = dir.path().join("exp.csv");
    let control = dir.path().join("ctrl.csv");

    for (path, seed) in [(&experimental, "21"), (&control, "22")] {
        let sim = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(sim.status.success());
    }

    let analyze = run(&[
        "analyze",
        "--trace",
        experimental.to_str().unwrap(),
        "--protocol",
        "type2",
        "--step-time",
        "900",
        "--controls",
        control.to_str().unwrap(),
    ]);
    assert!(analyze.status.success(), "stderr: {}", stderr(&analyze));
    let text = stdout(&analyze);
    let row = text.lines().nth(1).unwrap();
    assert!(row.ends_with("true"), "row not calibrated: {row}");
}

#[test]
fn begin_tolerance_violation_directs_to_type2_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // 0.3 C of initial mismatch and a short zone 1: the type-1 precondition
    // fails while type-2 still applies.
    let text = format!("{NULL_CONFIG}sim.initial_temp_l = 22.3\nsim.duration = 9000\n");
    let config = write_config(dir.path(), "skewed.conf", &text);
    let trace = dir.path().join("trace.csv");
    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(sim.status.success());

    let analyze = run(&[
        "analyze",
        "--trace",
        trace.to_str().unwrap(),
        "--protocol",
        "type1",
        "--step-time",
        "900",
    ]);
    assert_eq!(analyze.status.code(), Some(1));
    let message = stderr(&analyze);
    assert!(
        message.starts_with("error[E_PROTOCOL]:"),
        "stderr: {message}"
    );
    assert!(message.contains("type-2"), "stderr: {message}");

    // The type-2 scheme succeeds on the same trace.
    let type2 = run(&[
        "analyze",
        "--trace",
        trace.to_str().unwrap(),
        "--protocol",
        "type2",
        "--step-time",
        "900",
    ]);
    assert!(type2.status.success());
}

#[test]
fn batch_writes_summary_and_recovery_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{NULL_CONFIG}\
plan.protocol = type2
plan.n_control = 3
plan.n_experimental = 3
plan.injected_dc_over_c = 0.0208
plan.seed_base = 500
"
    );
    let config = write_config(dir.path(), "batch.conf", &text);
    let summary = dir.path().join("summary.csv");

    let batch = run(&[
        "batch",
        "--config",
        config.to_str().unwrap(),
        "--out-summary",
        summary.to_str().unwrap(),
    ]);
    assert!(batch.status.success(), "stderr: {}", stderr(&batch));

    let summary_text = fs::read_to_string(&summary).unwrap();
    let mut lines = summary_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,mark,n,delta_t_mean,delta_t_std,dt_mean,dt_std,\
         dc_over_c_mean,dc_over_c_std,time_after_excitation_s"
    );
    let row = lines.next().expect("one summary row");
    assert!(row.starts_with("type2,steady,3,"), "row: {row}");

    let recovery = stdout(&batch);
    assert!(
        recovery.starts_with("protocol,mark,bias,z,pass"),
        "{recovery}"
    );
    assert!(recovery
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("type2,steady,"));
}

#[test]
fn simulate_is_bit_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let mut short = String::from(NULL_CONFIG);
    short.push_str("sim.duration = 1200\n");
    let config = write_config(dir.path(), "short.conf", &short);

    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let out_c = dir.path().join("c.csv");
    for (path, seed) in [(&out_a, "9"), (&out_b, "9"), (&out_c, "10")] {
        let sim = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(sim.status.success());
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
    assert_ne!(fs::read(&out_a).unwrap(), fs::read(&out_c).unwrap());
}

#[test]
fn env_var_provides_the_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut short = String::from(NULL_CONFIG);
    short.push_str("sim.duration = 1200\n");
    let config = write_config(dir.path(), "short.conf", &short);

    let via_env = dir.path().join("env.csv");
    let via_flag = dir.path().join("flag.csv");
    let status = diffcal()
        .args([
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            via_env.to_str().unwrap(),
        ])
        .env("DIFFCAL_SEED", "123")
        .status()
        .unwrap();
    assert!(status.success());
    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "123",
        "--out",
        via_flag.to_str().unwrap(),
    ]);
    assert!(sim.status.success());
    assert_eq!(fs::read(&via_env).unwrap(), fs::read(&via_flag).unwrap());
}

#[test]
fn detect_finds_an_injected_event_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    // Default channel coupling: the excursion relaxes back to the baseline,
    // so the differential shows a clean warming bump.
    let text = "\
sim.mode = active
thermostat.steps = 0:22, 900:24
sim.duration = 14400
noise.rng_seed = 11
event.1.channel = fluid_L
event.1.start = 9000
event.1.duration = 1800
event.1.amplitude = 0.002
event.1.shape = gaussian_bump
";
    let config = write_config(dir.path(), "event.conf", text);
    let trace = dir.path().join("trace.csv");
    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(sim.status.success());

    // The differential cancels the common thermal profile; the quiet span
    // before the event serves as the noise baseline.
    let detect = run(&[
        "detect",
        "--trace",
        trace.to_str().unwrap(),
        "--detrend",
        "linear",
        "--channel",
        "diff",
        "--noise-window",
        "7200",
    ]);
    assert!(detect.status.success(), "stderr: {}", stderr(&detect));
    let text = stdout(&detect);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "detect output:\n{text}");
    let fields: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(fields[0], "diff");
    assert_eq!(fields[4], "1");
    let amplitude: f64 = fields[3].parse().unwrap();
    assert!(
        (amplitude - 0.002).abs() <= 0.2 * 0.002,
        "event amplitude {amplitude}"
    );
}

#[test]
fn plot_emits_svg_polylines() {
    let dir = tempfile::tempdir().unwrap();
    let mut short = String::from(NULL_CONFIG);
    short.push_str("sim.duration = 2400\n");
    let config = write_config(dir.path(), "short.conf", &short);
    let trace = dir.path().join("trace.csv");
    let chart = dir.path().join("chart.svg");
    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(sim.status.success());

    let plot = run(&[
        "plot",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        chart.to_str().unwrap(),
        "--channels",
        "fluid_L,fluid_R,diff",
    ]);
    assert!(plot.status.success(), "stderr: {}", stderr(&plot));
    let svg = fs::read_to_string(&chart).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn leadlag_reports_constructed_shift() {
    use diffcal_core::io::write_trace_file;
    use diffcal_core::MultiChannelTrace;
    use std::f64::consts::PI;

    // A trace whose differential is the environment delayed by 1800 s.
    let dir = tempfile::tempdir().unwrap();
    let period = 10.0;
    let n = (86_400.0 * 1.5 / period) as usize;
    let day = 86_400.0;
    let env: Vec<f64> = (0..n)
        .map(|i| 21.0 + 0.15 * (2.0 * PI * (i as f64 * period) / day).sin())
        .collect();
    let fluid_l: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * period - 1800.0;
            22.0 + 0.05 * (2.0 * PI * t / day).sin()
        })
        .collect();
    let trace = MultiChannelTrace::new(
        period,
        0.0,
        fluid_l,
        vec![22.0; n],
        vec![21.5; n],
        vec![21.5; n],
        env,
    )
    .unwrap();
    let path = dir.path().join("leadlag.csv");
    write_trace_file(&trace, &path).unwrap();

    let out = run(&[
        "leadlag",
        "--trace",
        path.to_str().unwrap(),
        "--max-lag",
        "7200",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("peak_time_s,lag_s,correlation,reliable"));
    for row in text.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        let lag: f64 = fields[1].parse().unwrap();
        assert!((lag - 1800.0).abs() <= period, "lag {lag}");
        assert_eq!(fields[3], "true");
    }
}

#[test]
fn unknown_flags_and_bad_configs_use_distinct_statuses() {
    let usage = run(&["analyze", "--nonsense"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(stderr(&usage).starts_with("error[E_USAGE]:"));

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.conf", "sim.bogus_key = 1\n");
    let trace = dir.path().join("t.csv");
    let sim = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(1));
    let message = stderr(&sim);
    assert!(message.starts_with("error[E_PARSE]:"), "stderr: {message}");
    assert_eq!(message.lines().count(), 1, "single-line error expected");
}
