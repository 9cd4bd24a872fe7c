//! Comparability metrics: noise-to-aggregate ratio, test set ratio, event
//! ratio, root-mean-squared error, and the per-household summary row.

use crate::error::NilmError;
use crate::events::{events_per_day_stats, EventParams};
use crate::ingestion::Household;
use crate::timeseries::{
    effective_duration, resample_to_grid, FillPolicy, PowerSeries, PowerType,
};
use serde::Serialize;
use std::collections::BTreeSet;

/// Result of a NAR computation together with its alignment context.
#[derive(Debug, Clone, Serialize)]
pub struct NarResult {
    pub ratio: f64,
    pub power_type: PowerType,
    pub samples_used: usize,
    pub interval_s: i64,
}

/// Noise-to-aggregate ratio: sum of |mains - submeter sum| over the aligned
/// intersection grid, divided by the summed mains readings.
///
/// Mains and submeters are resampled onto a shared grid of `interval`
/// seconds; the metric is evaluated only where all series have coverage.
/// A ratio above 1 signals sub-metered energy exceeding mains and is
/// reported as-is, never clamped.
pub fn nar(
    mains: &PowerSeries,
    submeters: &[&PowerSeries],
    interval: i64,
) -> Result<NarResult, NilmError> {
    let power_type = mains.power_type();
    if submeters.iter().any(|s| s.power_type() != power_type) {
        return Err(NilmError::Metric("power type mismatch".into()));
    }
    if mains.is_empty() {
        return Err(NilmError::Metric("no overlapping coverage".into()));
    }

    let anchor = mains.timestamps()[0];
    let policy_for = |s: &PowerSeries| {
        if interval >= s.nominal_interval() {
            FillPolicy::MeanDownsample
        } else {
            FillPolicy::ForwardFillBounded(3)
        }
    };
    let mains_r = resample_to_grid(mains, anchor, interval, policy_for(mains))?;
    let subs_r: Vec<PowerSeries> = submeters
        .iter()
        .map(|s| resample_to_grid(s, anchor, interval, policy_for(s)))
        .collect::<Result<_, _>>()?;

    let mut common: BTreeSet<i64> = mains_r.timestamps().iter().copied().collect();
    for s in &subs_r {
        let set: BTreeSet<i64> = s.timestamps().iter().copied().collect();
        common = common.intersection(&set).copied().collect();
    }
    if common.is_empty() {
        return Err(NilmError::Metric("no overlapping coverage".into()));
    }

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for &t in &common {
        let yi = mains_r.timestamps().binary_search(&t).unwrap();
        let y = mains_r.values()[yi];
        let mut x_sum = 0.0;
        for s in &subs_r {
            let i = s.timestamps().binary_search(&t).unwrap();
            x_sum += s.values()[i];
        }
        numerator += (y - x_sum).abs();
        denominator += y;
    }
    if denominator <= 0.0 {
        return Err(NilmError::Metric("zero aggregate energy".into()));
    }

    Ok(NarResult {
        ratio: numerator / denominator,
        power_type,
        samples_used: common.len(),
        interval_s: interval,
    })
}

/// Test set ratio: effective test duration over effective total duration.
pub fn tsr(test_duration_s: i64, total_duration_s: i64) -> Result<f64, NilmError> {
    if total_duration_s <= 0 {
        return Err(NilmError::Metric("total duration must be positive".into()));
    }
    if test_duration_s < 0 {
        return Err(NilmError::Metric("negative test duration".into()));
    }
    if test_duration_s > total_duration_s {
        return Err(NilmError::Metric("test exceeds total".into()));
    }
    Ok(test_duration_s as f64 / total_duration_s as f64)
}

/// Event ratio: events in the test set over events in the whole dataset.
pub fn evr(test_events: usize, total_events: usize) -> Result<f64, NilmError> {
    if total_events == 0 {
        return Err(NilmError::Metric("no events in dataset".into()));
    }
    if test_events > total_events {
        return Err(NilmError::Metric("test events exceed total".into()));
    }
    Ok(test_events as f64 / total_events as f64)
}

/// Root-mean-squared error over two series on identical timestamp grids.
/// Alignment mismatches are an error, never an implicit resample.
pub fn rmse(estimate: &PowerSeries, truth: &PowerSeries) -> Result<f64, NilmError> {
    if estimate.is_empty() || truth.is_empty() {
        return Err(NilmError::Metric("empty overlap".into()));
    }
    if estimate.timestamps() != truth.timestamps() {
        return Err(NilmError::Metric("unaligned series".into()));
    }
    let n = estimate.len() as f64;
    let sq_sum: f64 = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(e, t)| (e - t).powi(2))
        .sum();
    Ok((sq_sum / n).sqrt())
}

/// One row of the dataset-comparison summary. Fields that cannot be
/// computed for a household are `None` and render as "-".
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub house: String,
    pub duration_days_wall_clock: f64,
    pub duration_days_effective: f64,
    pub meter_count_with_mains: usize,
    pub meter_count_without_mains: usize,
    pub mains_interval_s: Option<i64>,
    pub sub_interval_s: Option<i64>,
    pub mains_power_types: Vec<PowerType>,
    pub sub_power_types: Vec<PowerType>,
    pub min_events_per_day: Option<u64>,
    pub avg_events_per_day: Option<u64>,
    pub nar_p: Option<f64>,
    pub nar_q: Option<f64>,
    pub nar_s: Option<f64>,
}

/// Compute the summary row for one household. Sub-operations that fail for
/// a particular field leave that field unavailable rather than failing the
/// whole row.
pub fn dataset_summary(
    household: &Household,
    params: &EventParams,
) -> Result<SummaryRow, NilmError> {
    let mains = household
        .mains
        .first()
        .ok_or_else(|| NilmError::Metric("no mains channel".into()))?;
    let mains_series = mains
        .primary_series()
        .ok_or_else(|| NilmError::Metric("mains channel has no series".into()))?;

    let wall = mains_series.wall_clock_duration() as f64 / 86400.0;
    let eff = effective_duration(mains_series, params.gap_factor) as f64 / 86400.0;

    let mains_interval = household
        .mains
        .iter()
        .filter_map(|c| c.series.values().next().map(|s| s.nominal_interval()))
        .max();
    let sub_interval = household
        .submeters
        .iter()
        .filter_map(|c| c.series.values().next().map(|s| s.nominal_interval()))
        .max();

    let mut mains_types: BTreeSet<PowerType> = BTreeSet::new();
    for c in &household.mains {
        mains_types.extend(c.series.keys().copied());
    }
    let mut sub_types: BTreeSet<PowerType> = BTreeSet::new();
    for c in &household.submeters {
        sub_types.extend(c.series.keys().copied());
    }

    let stats = events_per_day_stats(household, params).ok();

    let nar_for = |pt: PowerType| -> Option<f64> {
        if !mains_types.contains(&pt) {
            return None;
        }
        // NAR is defined whenever mains carries this type; with no
        // sub-metered coverage the unexplained fraction is the whole signal
        let mains_s = household
            .mains
            .iter()
            .find_map(|c| c.series.get(&pt))?;
        let subs: Vec<&PowerSeries> = household
            .submeters
            .iter()
            .filter_map(|c| c.series.get(&pt))
            .collect();
        if !household.submeters.is_empty() && subs.is_empty() {
            return None; // mirrors the "-" entries where sub coverage is absent
        }
        let interval = subs
            .iter()
            .map(|s| s.nominal_interval())
            .chain(std::iter::once(mains_s.nominal_interval()))
            .max()
            .unwrap();
        nar(mains_s, &subs, interval).ok().map(|r| r.ratio)
    };

    let nar_p = nar_for(PowerType::P);
    let nar_q = nar_for(PowerType::Q);
    let nar_s = nar_for(PowerType::S);
    Ok(SummaryRow {
        dataset: household.dataset_name.clone(),
        house: household.house_id.clone(),
        duration_days_wall_clock: wall,
        duration_days_effective: eff,
        meter_count_with_mains: household.mains.len() + household.submeters.len(),
        meter_count_without_mains: household.submeters.len(),
        mains_interval_s: mains_interval,
        sub_interval_s: sub_interval,
        mains_power_types: mains_types.into_iter().collect(),
        sub_power_types: sub_types.into_iter().collect(),
        min_events_per_day: stats.as_ref().map(|s| s.min_report),
        avg_events_per_day: stats.as_ref().map(|s| s.avg_report),
        nar_p,
        nar_q,
        nar_s,
    })
}
