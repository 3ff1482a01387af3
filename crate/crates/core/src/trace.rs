//! Multi-channel temperature traces and uniformly sampled series.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sensor channels of the differential calorimeter, in file order.
///
/// `FluidL` carries the experimental sample, `FluidR` the control sample.
/// The two air sensors report the chamber temperature and `Env` the
/// laboratory temperature outside the instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    FluidL,
    FluidR,
    Air1,
    Air2,
    Env,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::FluidL,
        Channel::FluidR,
        Channel::Air1,
        Channel::Air2,
        Channel::Env,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::FluidL => "fluid_L",
            Channel::FluidR => "fluid_R",
            Channel::Air1 => "air_1",
            Channel::Air2 => "air_2",
            Channel::Env => "env",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluid_L" => Ok(Channel::FluidL),
            "fluid_R" => Ok(Channel::FluidR),
            "air_1" => Ok(Channel::Air1),
            "air_2" => Ok(Channel::Air2),
            "env" => Ok(Channel::Env),
            other => Err(Error::InvalidConfig(format!("unknown channel '{other}'"))),
        }
    }
}

/// A uniformly sampled scalar series. Sample `i` is taken at
/// `start_time + i * sample_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub start_time: f64,
    pub sample_period: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start_time: f64, sample_period: f64, values: Vec<f64>) -> Self {
        assert!(sample_period > 0.0, "sample period must be positive");
        TimeSeries {
            start_time,
            sample_period,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_period
    }

    pub fn end_time(&self) -> f64 {
        if self.values.is_empty() {
            self.start_time
        } else {
            self.time(self.values.len() - 1)
        }
    }

    /// Indices of samples with time in the half-open interval `[from, to)`.
    pub fn index_range(&self, from: f64, to: f64) -> std::ops::Range<usize> {
        let lo = ((from - self.start_time) / self.sample_period)
            .ceil()
            .max(0.0) as usize;
        let hi = ((to - self.start_time) / self.sample_period)
            .ceil()
            .max(0.0) as usize;
        let lo = lo.min(self.values.len());
        let hi = hi.clamp(lo, self.values.len());
        lo..hi
    }

    /// Mean over samples with time in `[from, to)`.
    pub fn window_mean(&self, from: f64, to: f64) -> Result<f64> {
        let range = self.index_range(from, to);
        if range.is_empty() {
            return Err(Error::TraceTooShort(format!(
                "window [{from:.1}, {to:.1}) s contains no samples \
                 (series spans [{:.1}, {:.1}] s)",
                self.start_time,
                self.end_time()
            )));
        }
        let slice = &self.values[range.clone()];
        Ok(slice.iter().sum::<f64>() / slice.len() as f64)
    }

    /// Sub-series starting at the first sample with time >= `from`.
    pub fn tail_from(&self, from: f64) -> TimeSeries {
        let start = ((from - self.start_time) / self.sample_period)
            .ceil()
            .max(0.0) as usize;
        let start = start.min(self.values.len());
        TimeSeries {
            start_time: self.time(start),
            sample_period: self.sample_period,
            values: self.values[start..].to_vec(),
        }
    }
}

/// Synchronously sampled temperatures of all five channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelTrace {
    pub sample_period: f64,
    pub start_time: f64,
    pub fluid_l: Vec<f64>,
    pub fluid_r: Vec<f64>,
    pub air_1: Vec<f64>,
    pub air_2: Vec<f64>,
    pub env: Vec<f64>,
}

impl MultiChannelTrace {
    pub fn new(
        sample_period: f64,
        start_time: f64,
        fluid_l: Vec<f64>,
        fluid_r: Vec<f64>,
        air_1: Vec<f64>,
        air_2: Vec<f64>,
        env: Vec<f64>,
    ) -> Result<Self> {
        if !sample_period.is_finite() || sample_period <= 0.0 {
            return Err(Error::InvalidConfig("sample_period must be > 0".into()));
        }
        let n = fluid_l.len();
        if n < 2 {
            return Err(Error::InvalidConfig(
                "trace must contain at least 2 samples".into(),
            ));
        }
        if [fluid_r.len(), air_1.len(), air_2.len(), env.len()]
            .iter()
            .any(|&len| len != n)
        {
            return Err(Error::InvalidConfig(
                "all channel series must have equal length".into(),
            ));
        }
        Ok(MultiChannelTrace {
            sample_period,
            start_time,
            fluid_l,
            fluid_r,
            air_1,
            air_2,
            env,
        })
    }

    pub fn len(&self) -> usize {
        self.fluid_l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluid_l.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_period
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::FluidL => &self.fluid_l,
            Channel::FluidR => &self.fluid_r,
            Channel::Air1 => &self.air_1,
            Channel::Air2 => &self.air_2,
            Channel::Env => &self.env,
        }
    }

    pub fn series(&self, channel: Channel) -> TimeSeries {
        TimeSeries::new(
            self.start_time,
            self.sample_period,
            self.channel(channel).to_vec(),
        )
    }

    /// Channel-differential series `fluid_L - fluid_R`.
    pub fn differential(&self) -> TimeSeries {
        let values = self
            .fluid_l
            .iter()
            .zip(&self.fluid_r)
            .map(|(l, r)| l - r)
            .collect();
        TimeSeries::new(self.start_time, self.sample_period, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn rejects_ragged_channels() {
        let err = MultiChannelTrace::new(1.0, 0.0, ramp(10), ramp(9), ramp(10), ramp(10), ramp(10));
        assert!(err.is_err());
    }

    #[test]
    fn rejects_single_sample() {
        let err = MultiChannelTrace::new(1.0, 0.0, ramp(1), ramp(1), ramp(1), ramp(1), ramp(1));
        assert!(err.is_err());
    }

    #[test]
    fn window_mean_is_half_open() {
        let s = TimeSeries::new(0.0, 1.0, ramp(10));
        // [2, 5) covers samples 2, 3, 4.
        assert_eq!(s.window_mean(2.0, 5.0).unwrap(), 3.0);
        assert!(s.window_mean(10.0, 12.0).is_err());
    }

    #[test]
    fn differential_subtracts_channels() {
        let tr = MultiChannelTrace::new(
            1.0,
            0.0,
            vec![1.0, 2.0, 3.0],
            vec![0.5, 0.5, 0.5],
            ramp(3),
            ramp(3),
            ramp(3),
        )
        .unwrap();
        assert_eq!(tr.differential().values, vec![0.5, 1.5, 2.5]);
    }

    #[test]
    fn tail_from_aligns_to_next_sample() {
        let s = TimeSeries::new(0.0, 2.0, ramp(5)); // times 0,2,4,6,8
        let tail = s.tail_from(3.0);
        assert_eq!(tail.start_time, 4.0);
        assert_eq!(tail.values, vec![2.0, 3.0, 4.0]);
    }
}
