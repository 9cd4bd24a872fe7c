//! Core time-series representation: regular-grid resampling, gap detection,
//! effective (gap-excluded) durations and aggregate composition.

use crate::error::NilmError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// AC power type of a measured signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PowerType {
    /// Active power, watts.
    P,
    /// Reactive power, var. The only type where negative readings are valid.
    Q,
    /// Apparent power, volt-amperes.
    S,
}

impl PowerType {
    pub fn as_str(&self) -> &'static str {
        match self {
            PowerType::P => "P",
            PowerType::Q => "Q",
            PowerType::S => "S",
        }
    }

    pub fn parse(s: &str) -> Option<PowerType> {
        match s {
            "P" => Some(PowerType::P),
            "Q" => Some(PowerType::Q),
            "S" => Some(PowerType::S),
            _ => None,
        }
    }
}

impl std::fmt::Display for PowerType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A timestamped sequence of power readings of one AC power type.
///
/// Timestamps are integer UTC seconds, strictly increasing. The series may be
/// empty (e.g. an aggregate over an empty coverage intersection).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    power_type: PowerType,
    nominal_interval: i64,
}

/// A region where consecutive timestamps are further apart than the gap
/// threshold. `start` and `end` are the bracketing sample timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub start: i64,
    pub end: i64,
}

impl Gap {
    pub fn span(&self) -> i64 {
        self.end - self.start
    }
}

/// How `resample` maps input samples onto the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillPolicy {
    /// Average all input samples falling inside each output bin; empty bins
    /// are omitted and become gaps.
    MeanDownsample,
    /// Repeat the last seen value for at most this many grid points, then
    /// omit grid points until a new sample arrives.
    ForwardFillBounded(usize),
}

impl PowerSeries {
    pub fn new(
        timestamps: Vec<i64>,
        values: Vec<f64>,
        power_type: PowerType,
        nominal_interval: i64,
    ) -> Result<Self, NilmError> {
        if timestamps.len() != values.len() {
            return Err(NilmError::Series(format!(
                "length mismatch: {} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if nominal_interval <= 0 {
            return Err(NilmError::Series("nominal_interval must be positive".into()));
        }
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(NilmError::Series(format!(
                    "timestamps not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(NilmError::Series("non-finite value".into()));
            }
            if v < 0.0 && power_type != PowerType::Q {
                return Err(NilmError::Series(format!(
                    "negative value {v} invalid for power type {power_type}"
                )));
            }
        }
        Ok(PowerSeries {
            timestamps,
            values,
            power_type,
            nominal_interval,
        })
    }

    pub fn empty(power_type: PowerType, nominal_interval: i64) -> Self {
        PowerSeries {
            timestamps: Vec::new(),
            values: Vec::new(),
            power_type,
            nominal_interval,
        }
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn power_type(&self) -> PowerType {
        self.power_type
    }

    pub fn nominal_interval(&self) -> i64 {
        self.nominal_interval
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Wall-clock span in seconds (last minus first timestamp).
    pub fn wall_clock_duration(&self) -> i64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(&first), Some(&last)) => last - first,
            _ => 0,
        }
    }

    /// Samples with `start <= timestamp < end`.
    pub fn slice(&self, start: i64, end: i64) -> PowerSeries {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        PowerSeries {
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
            power_type: self.power_type,
            nominal_interval: self.nominal_interval,
        }
    }
}

/// Resample onto a regular grid of `interval` seconds anchored at the first
/// input timestamp.
pub fn resample(
    series: &PowerSeries,
    interval: i64,
    policy: FillPolicy,
) -> Result<PowerSeries, NilmError> {
    if series.is_empty() {
        return Err(NilmError::Series("empty series".into()));
    }
    if interval < 1 {
        return Err(NilmError::Series("sub-second not supported".into()));
    }
    let anchor = series.timestamps[0];
    resample_to_grid(series, anchor, interval, policy)
}

/// Resample onto the grid `anchor + k * interval`. Grid points before the
/// first input sample are omitted.
pub fn resample_to_grid(
    series: &PowerSeries,
    anchor: i64,
    interval: i64,
    policy: FillPolicy,
) -> Result<PowerSeries, NilmError> {
    if series.is_empty() {
        return Err(NilmError::Series("empty series".into()));
    }
    if interval < 1 {
        return Err(NilmError::Series("sub-second not supported".into()));
    }
    let ts = &series.timestamps;
    let vs = &series.values;
    let first = ts[0];
    let last = *ts.last().unwrap();

    // First grid point at or after the first sample.
    let start_k = (first - anchor).div_euclid(interval)
        + if (first - anchor).rem_euclid(interval) == 0 { 0 } else { 1 };

    let mut out_ts = Vec::new();
    let mut out_vs = Vec::new();

    match policy {
        FillPolicy::MeanDownsample => {
            // Bin k covers [g_k, g_k + interval).
            let mut idx = 0usize;
            let mut k = start_k;
            loop {
                let g = anchor + k * interval;
                if g > last {
                    break;
                }
                while idx < ts.len() && ts[idx] < g {
                    idx += 1;
                }
                let mut sum = 0.0;
                let mut n = 0usize;
                let mut all_equal = true;
                let mut j = idx;
                while j < ts.len() && ts[j] < g + interval {
                    sum += vs[j];
                    if vs[j] != vs[idx] {
                        all_equal = false;
                    }
                    n += 1;
                    j += 1;
                }
                if n > 0 {
                    out_ts.push(g);
                    // keep constant bins bit-exact
                    out_vs.push(if all_equal { vs[idx] } else { sum / n as f64 });
                }
                idx = j;
                k += 1;
            }
        }
        FillPolicy::ForwardFillBounded(limit) => {
            let max_hold = interval * limit as i64;
            let mut idx = 0usize;
            let mut k = start_k;
            loop {
                let g = anchor + k * interval;
                if g > last {
                    break;
                }
                while idx + 1 < ts.len() && ts[idx + 1] <= g {
                    idx += 1;
                }
                // ts[idx] is the last sample <= g once we have passed the first one.
                if ts[idx] <= g && g - ts[idx] <= max_hold {
                    out_ts.push(g);
                    out_vs.push(vs[idx]);
                }
                k += 1;
            }
        }
    }

    PowerSeries::new(out_ts, out_vs, series.power_type, interval)
}

/// Every pair of consecutive timestamps whose difference is strictly greater
/// than `gap_factor * nominal_interval`. Gaps come out disjoint and ordered.
pub fn detect_gaps(series: &PowerSeries, gap_factor: f64) -> Vec<Gap> {
    let threshold = gap_factor * series.nominal_interval as f64;
    series
        .timestamps
        .windows(2)
        .filter(|w| (w[1] - w[0]) as f64 > threshold)
        .map(|w| Gap { start: w[0], end: w[1] })
        .collect()
}

/// Wall-clock span minus the total span of detected gaps, in seconds.
pub fn effective_duration(series: &PowerSeries, gap_factor: f64) -> i64 {
    let total = series.wall_clock_duration();
    let gap_total: i64 = detect_gaps(series, gap_factor).iter().map(Gap::span).sum();
    total - gap_total
}

/// Resample every channel onto a shared grid and return the pointwise sum
/// over the intersection of their covered grid points.
///
/// Channels covering disjoint time ranges produce an empty series, not an
/// error. Downsampling channels averages per bin; upsampling forward-fills
/// with the default bound of 3 grid points.
pub fn sum_channels(channels: &[&PowerSeries], interval: i64) -> Result<PowerSeries, NilmError> {
    if channels.is_empty() {
        return Err(NilmError::Series("no channels".into()));
    }
    let power_type = channels[0].power_type;
    if channels.iter().any(|c| c.power_type != power_type) {
        return Err(NilmError::Series("power type mismatch".into()));
    }
    if channels.iter().any(|c| c.is_empty()) {
        return Ok(PowerSeries::empty(power_type, interval));
    }
    let anchor = channels.iter().map(|c| c.timestamps[0]).min().unwrap();

    let resampled: Vec<PowerSeries> = channels
        .iter()
        .map(|c| {
            let policy = if interval >= c.nominal_interval {
                FillPolicy::MeanDownsample
            } else {
                FillPolicy::ForwardFillBounded(3)
            };
            resample_to_grid(c, anchor, interval, policy)
        })
        .collect::<Result<_, _>>()?;

    let mut common: BTreeSet<i64> = resampled[0].timestamps.iter().copied().collect();
    for r in &resampled[1..] {
        let set: BTreeSet<i64> = r.timestamps.iter().copied().collect();
        common = common.intersection(&set).copied().collect();
    }

    let mut out_ts = Vec::with_capacity(common.len());
    let mut out_vs = Vec::with_capacity(common.len());
    for &t in &common {
        let mut sum = 0.0;
        for r in &resampled {
            let i = r.timestamps.binary_search(&t).expect("timestamp in intersection");
            sum += r.values[i];
        }
        out_ts.push(t);
        out_vs.push(sum);
    }
    PowerSeries::new(out_ts, out_vs, power_type, interval)
}
