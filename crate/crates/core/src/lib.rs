//! Two-channel differential calorimeter simulation and analysis.
//!
//! The crate covers the full measurement pipeline:
//!
//! * [`sim`] generates synthetic five-channel temperature traces from a
//!   lumped-parameter thermal model with configurable heat-capacity
//!   perturbation, sensor noise, filling error, environmental drift and
//!   injectable mesoscale events.
//! * [`estimator`] extracts differential temperatures under the type-1
//!   (fixed marks) and type-2 (steady state) protocols, calibrates the zero
//!   level against control attempts and computes the relative heat-capacity
//!   change dC/C with a first-order error budget.
//! * [`signal`] fits and removes trends, detects steady state and mesoscale
//!   fluctuations, quantifies fluctuation growth and estimates lead/lag
//!   against environmental temperature swings.
//! * [`harness`] orchestrates control and experimental attempt batches into
//!   mean-and-deviation summary tables and recovery reports.
//! * [`io`] reads and writes the trace CSV format, parses run
//!   configurations and renders SVG charts.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod signal;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{Channel, MultiChannelTrace, TimeSeries};
