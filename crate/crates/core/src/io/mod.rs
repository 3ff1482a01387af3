//! File formats: the versioned trace CSV, the line-oriented run
//! configuration and static SVG charts.

mod config;
mod svg;
mod trace_file;

pub use config::{parse_run_config, read_run_config, RunConfig};
pub use svg::write_svg_plot;
pub use trace_file::{read_trace, read_trace_file, write_trace, write_trace_file};
