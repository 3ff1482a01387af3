//! Trace CSV format, version 1.
//!
//! ```text
//! # diffcal-trace v1 period=1 start=0
//! time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C,env_C
//! 0.000000,22.000010,21.999990,22.001000,22.000980,20.998770
//! ```
//!
//! Temperatures carry six decimals, one digit below the sensor quantization,
//! so a round trip preserves every emitted sample.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::MultiChannelTrace;

const HEADER_PREFIX: &str = "# diffcal-trace v";
const COLUMN_HEADER: &str = "time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C,env_C";
const FORMAT_VERSION: u32 = 1;

/// Write a trace in the versioned CSV format.
pub fn write_trace(trace: &MultiChannelTrace, mut destination: impl Write) -> Result<()> {
    writeln!(
        destination,
        "{HEADER_PREFIX}{FORMAT_VERSION} period={} start={}",
        trace.sample_period, trace.start_time
    )?;
    writeln!(destination, "{COLUMN_HEADER}")?;
    for i in 0..trace.len() {
        writeln!(
            destination,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            trace.time(i),
            trace.fluid_l[i],
            trace.fluid_r[i],
            trace.air_1[i],
            trace.air_2[i],
            trace.env[i]
        )?;
    }
    Ok(())
}

pub fn write_trace_file(trace: &MultiChannelTrace, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_trace(trace, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(f64, f64)> {
    let rest = line
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::TraceFormat("missing '# diffcal-trace v...' header".into()))?;
    let mut fields = rest.split_whitespace();
    let version: u32 = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::TraceFormat("unreadable format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::TraceFormat(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let mut period = None;
    let mut start = None;
    for field in fields {
        if let Some(v) = field.strip_prefix("period=") {
            period = v.parse::<f64>().ok();
        } else if let Some(v) = field.strip_prefix("start=") {
            start = v.parse::<f64>().ok();
        }
    }
    match (period, start) {
        (Some(p), Some(s)) if p > 0.0 && p.is_finite() && s.is_finite() => Ok((p, s)),
        _ => Err(Error::TraceFormat(
            "header needs finite 'period=' (> 0) and 'start=' fields".into(),
        )),
    }
}

/// Read a trace written by [`write_trace`].
pub fn read_trace(source: impl Read) -> Result<MultiChannelTrace> {
    let mut lines = BufReader::new(source).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::TraceFormat("empty file".into()))??;
    let (sample_period, start_time) = parse_header(&header)?;
    let columns = lines
        .next()
        .ok_or_else(|| Error::TraceFormat("missing column header".into()))??;
    if columns.trim() != COLUMN_HEADER {
        return Err(Error::TraceFormat(format!(
            "unexpected column header '{}', expected '{COLUMN_HEADER}'",
            columns.trim()
        )));
    }

    let mut channels: [Vec<f64>; 5] = Default::default();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = [0.0_f64; 6];
        let mut count = 0;
        for (slot, field) in line.split(',').enumerate() {
            if slot >= 6 {
                count = 7;
                break;
            }
            values[slot] = field.trim().parse::<f64>().map_err(|_| {
                Error::TraceFormat(format!("row {}: unreadable number '{field}'", row + 3))
            })?;
            count = slot + 1;
        }
        if count != 6 {
            return Err(Error::TraceFormat(format!(
                "row {}: expected 6 columns, found {count}",
                row + 3
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::TraceFormat(format!(
                "row {}: non-finite value",
                row + 3
            )));
        }
        for (channel, &value) in channels.iter_mut().zip(&values[1..]) {
            channel.push(value);
        }
    }

    let [fluid_l, fluid_r, air_1, air_2, env] = channels;
    MultiChannelTrace::new(
        sample_period,
        start_time,
        fluid_l,
        fluid_r,
        air_1,
        air_2,
        env,
    )
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<MultiChannelTrace> {
    read_trace(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_attempt, CalorimeterConfig};

    #[test]
    fn round_trip_preserves_samples_within_print_precision() {
        let mut cfg = CalorimeterConfig::default_active();
        cfg.duration = 600.0;
        let trace = simulate_attempt(&cfg, &[]).unwrap();

        let mut buffer = Vec::new();
        write_trace(&trace, &mut buffer).unwrap();
        let back = read_trace(buffer.as_slice()).unwrap();

        assert_eq!(back.len(), trace.len());
        assert_eq!(back.sample_period, trace.sample_period);
        for i in 0..trace.len() {
            assert!((back.fluid_l[i] - trace.fluid_l[i]).abs() <= 1e-6);
            assert!((back.env[i] - trace.env[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn minimal_two_sample_trace_parses() {
        let text = "# diffcal-trace v1 period=1 start=0\n\
                    time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C,env_C\n\
                    0.000000,22.000000,22.000000,22.000000,22.000000,21.000000\n\
                    1.000000,22.000010,22.000000,22.000000,22.000000,21.000000\n";
        let trace = read_trace(text.as_bytes()).unwrap();
        assert_eq!(trace.len(), 2);
        assert!((trace.fluid_l[1] - 22.00001).abs() < 1e-9);
    }

    #[test]
    fn ragged_row_is_rejected() {
        let text = "# diffcal-trace v1 period=1 start=0\n\
                    time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C,env_C\n\
                    0.000000,22.0,22.0,22.0,22.0,21.0\n\
                    1.000000,22.0,22.0,22.0,22.0\n";
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(Error::TraceFormat(_))
        ));
    }

    #[test]
    fn bad_headers_are_rejected() {
        assert!(read_trace("nonsense\n".as_bytes()).is_err());
        let wrong_version = "# diffcal-trace v2 period=1 start=0\nx\n";
        assert!(read_trace(wrong_version.as_bytes()).is_err());
        let wrong_columns = "# diffcal-trace v1 period=1 start=0\n\
                             time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C\n";
        assert!(read_trace(wrong_columns.as_bytes()).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let text = "# diffcal-trace v1 period=1 start=0\n\
                    time_s,fluid_L_C,fluid_R_C,air_1_C,air_2_C,env_C\n\
                    0.000000,NaN,22.0,22.0,22.0,21.0\n";
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(Error::TraceFormat(_))
        ));
    }
}
