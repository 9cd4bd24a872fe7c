//! Representative power states per appliance and events as transitions
//! between them: median filter, 1-D k-means with elbow selection, center
//! merging, nearest-level assignment, and debounce.

use crate::error::NilmError;
use crate::ingestion::Household;
use crate::timeseries::{detect_gaps, effective_duration, PowerSeries};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Knobs for the state-extraction and event-detection pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventParams {
    pub filter_width: usize,
    pub k_max: usize,
    pub elbow_ratio: f64,
    pub merge_delta: f64,
    pub min_dwell: usize,
    pub restarts: usize,
    pub gap_factor: f64,
    pub seed: u64,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            filter_width: 5,
            k_max: 5,
            elbow_ratio: 0.05,
            merge_delta: 10.0,
            min_dwell: 2,
            restarts: 10,
            gap_factor: 3.0,
            seed: 0,
        }
    }
}

/// Representative power levels of an appliance, ascending, merged.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    pub levels: Vec<f64>,
    pub merge_delta: f64,
}

impl StateSet {
    pub fn nearest(&self, value: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &l) in self.levels.iter().enumerate() {
            let d = (value - l).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// One detected state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub timestamp: i64,
    pub from_state: usize,
    pub to_state: usize,
}

/// Per-appliance states, detected events, and the per-day rate.
#[derive(Debug, Clone)]
pub struct EventProfile {
    pub label: String,
    pub state_set: StateSet,
    pub events: Vec<Event>,
    pub events_per_day: f64,
}

/// Household-level Table-style event statistics.
#[derive(Debug, Clone)]
pub struct EventStats {
    /// Per-day rate of the least-active submeter, floored for reporting.
    pub min_report: u64,
    /// Household-total events per day, rounded for reporting.
    pub avg_report: u64,
    pub min_exact: f64,
    pub avg_exact: f64,
    pub profiles: Vec<EventProfile>,
}

/// Median filter with window clamped at the edges. Width is forced odd.
pub fn median_filter(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 || values.len() <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    let mut out = Vec::with_capacity(values.len());
    let mut window = Vec::with_capacity(width);
    for i in 0..values.len() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(values.len());
        window.clear();
        window.extend_from_slice(&values[lo..hi]);
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(window[window.len() / 2]);
    }
    out
}

/// Lloyd's algorithm on 1-D data for a fixed k, one restart.
fn kmeans_1d_once(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let mut centers: Vec<f64> = {
        let mut unique: Vec<f64> = values.to_vec();
        unique.sort_by(|a, b| a.partial_cmp(b).unwrap());
        unique.dedup();
        if unique.len() <= k {
            unique
        } else {
            let mut picks: Vec<f64> = unique.choose_multiple(rng, k).copied().collect();
            picks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            picks
        }
    };

    let mut assignment = vec![0usize; values.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centers.iter().enumerate() {
                let d = (v - c).abs();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &v) in values.iter().enumerate() {
            sums[assignment[i]] += v;
            counts[assignment[i]] += 1;
        }
        for j in 0..centers.len() {
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            } else {
                centers[j] = values[rng.gen_range(0..values.len())];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let wcss: f64 = values
        .iter()
        .zip(&assignment)
        .map(|(&v, &a)| (v - centers[a]).powi(2))
        .sum();
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (centers, wcss)
}

fn kmeans_1d(values: &[f64], k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (centers, wcss) = kmeans_1d_once(values, k, rng);
        if best.as_ref().is_none_or(|(_, bw)| wcss < *bw) {
            best = Some((centers, wcss));
        }
    }
    best.unwrap()
}

/// Extract representative power levels: median filter, k-means over
/// k = 1..k_max with elbow stopping, then merge of close centers.
pub fn representative_states(series: &PowerSeries, params: &EventParams) -> Result<StateSet, NilmError> {
    if series.is_empty() {
        return Err(NilmError::Series("empty series".into()));
    }
    let filtered = median_filter(series.values(), params.filter_width);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut selected = kmeans_1d(&filtered, 1, params.restarts, &mut rng);
    for k in 2..=params.k_max.max(1) {
        let prev_wcss = selected.1;
        if prev_wcss <= 1e-12 {
            break;
        }
        let candidate = kmeans_1d(&filtered, k, params.restarts, &mut rng);
        if prev_wcss - candidate.1 < params.elbow_ratio * prev_wcss {
            break;
        }
        selected = candidate;
    }

    let levels = merge_levels(&selected.0, params.merge_delta);
    Ok(StateSet {
        levels,
        merge_delta: params.merge_delta,
    })
}

/// Merge ascending centers closer than `merge_delta` into their mean.
fn merge_levels(centers: &[f64], merge_delta: f64) -> Vec<f64> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &c in centers {
        match out.last_mut() {
            Some(group) if c - group.last().unwrap() < merge_delta => group.push(c),
            _ => out.push(vec![c]),
        }
    }
    out.iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect()
}

/// Assign filtered samples to nearest levels and emit debounced transitions.
/// Level changes across detected gaps update the tracked state silently.
pub fn detect_events(
    series: &PowerSeries,
    states: &StateSet,
    params: &EventParams,
) -> Result<EventProfile, NilmError> {
    if states.levels.is_empty() {
        return Err(NilmError::Series("empty state set".into()));
    }
    let filtered = median_filter(series.values(), params.filter_width);
    let assigned: Vec<usize> = filtered.iter().map(|&v| states.nearest(v)).collect();
    let ts = series.timestamps();

    let gap_threshold = params.gap_factor * series.nominal_interval() as f64;
    let min_dwell = params.min_dwell.max(1);

    let mut events = Vec::new();
    if !assigned.is_empty() {
        let mut current = assigned[0];
        let mut i = 1usize;
        while i < assigned.len() {
            if assigned[i] != current {
                let end = (i + min_dwell).min(assigned.len());
                let persists = end - i >= min_dwell && assigned[i..end].iter().all(|&a| a == assigned[i]);
                if persists {
                    let crosses_gap = (ts[i] - ts[i - 1]) as f64 > gap_threshold;
                    if !crosses_gap {
                        events.push(Event {
                            timestamp: ts[i],
                            from_state: current,
                            to_state: assigned[i],
                        });
                    }
                    current = assigned[i];
                }
            }
            i += 1;
        }
    }

    let eff_days = effective_duration(series, params.gap_factor) as f64 / 86400.0;
    let events_per_day = if eff_days > 0.0 {
        events.len() as f64 / eff_days
    } else {
        0.0
    };

    Ok(EventProfile {
        label: String::new(),
        state_set: states.clone(),
        events,
        events_per_day,
    })
}

/// Full pipeline for one appliance series.
pub fn profile_series(
    label: &str,
    series: &PowerSeries,
    params: &EventParams,
) -> Result<EventProfile, NilmError> {
    let states = representative_states(series, params)?;
    let mut profile = detect_events(series, &states, params)?;
    profile.label = label.to_string();
    Ok(profile)
}

/// Min and average events per day across a household's submeters.
/// Min is the least-active appliance's rate; avg is the household total per
/// effective day.
pub fn events_per_day_stats(
    household: &Household,
    params: &EventParams,
) -> Result<EventStats, NilmError> {
    if household.submeters.is_empty() {
        return Err(NilmError::Metric("no submeters".into()));
    }
    let mut profiles = Vec::new();
    let mut total_events = 0usize;
    let mut max_eff_days = 0.0f64;
    for ch in &household.submeters {
        let series = ch
            .series
            .get(&crate::timeseries::PowerType::P)
            .or_else(|| ch.series.values().next())
            .ok_or_else(|| NilmError::Metric(format!("channel {} has no series", ch.meter_id)))?;
        let profile = profile_series(&ch.label, series, params)?;
        total_events += profile.events.len();
        let eff_days = effective_duration(series, params.gap_factor) as f64 / 86400.0;
        max_eff_days = max_eff_days.max(eff_days);
        profiles.push(profile);
    }

    let min_exact = profiles
        .iter()
        .map(|p| p.events_per_day)
        .fold(f64::INFINITY, f64::min);
    let avg_exact = if max_eff_days > 0.0 {
        total_events as f64 / max_eff_days
    } else {
        0.0
    };

    Ok(EventStats {
        min_report: min_exact.floor() as u64,
        avg_report: avg_exact.round() as u64,
        min_exact,
        avg_exact,
        profiles,
    })
}

/// Gaps visible to event detection; re-exported for reporting.
pub fn series_gaps(series: &PowerSeries, params: &EventParams) -> Vec<crate::timeseries::Gap> {
    detect_gaps(series, params.gap_factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::PowerType;

    fn series(vs: &[f64], interval: i64) -> PowerSeries {
        let ts: Vec<i64> = (0..vs.len() as i64).map(|i| i * interval).collect();
        PowerSeries::new(ts, vs.to_vec(), PowerType::P, interval).unwrap()
    }

    fn no_filter_params() -> EventParams {
        EventParams {
            filter_width: 1,
            ..EventParams::default()
        }
    }

    #[test]
    fn constant_zero_series_single_level() {
        let s = series(&[0.0; 50], 60);
        let states = representative_states(&s, &EventParams::default()).unwrap();
        assert_eq!(states.levels, vec![0.0]);
    }

    #[test]
    fn square_wave_two_levels() {
        let vs: Vec<f64> = (0..100).map(|i| if (i / 5) % 2 == 0 { 0.0 } else { 100.0 }).collect();
        let s = series(&vs, 60);
        let states = representative_states(&s, &no_filter_params()).unwrap();
        assert_eq!(states.levels, vec![0.0, 100.0]);
    }

    #[test]
    fn close_levels_merged() {
        let mut vs = Vec::new();
        for _ in 0..20 {
            vs.extend_from_slice(&[0.0; 10]);
            vs.extend_from_slice(&[50.0; 10]);
            vs.extend_from_slice(&[52.0; 10]);
        }
        let s = series(&vs, 60);
        let params = EventParams {
            filter_width: 1,
            merge_delta: 5.0,
            ..EventParams::default()
        };
        let states = representative_states(&s, &params).unwrap();
        assert_eq!(states.levels, vec![0.0, 51.0]);
    }

    #[test]
    fn constant_series_no_events() {
        let s = series(&[42.0; 100], 60);
        let params = no_filter_params();
        let states = representative_states(&s, &params).unwrap();
        let profile = detect_events(&s, &states, &params).unwrap();
        assert!(profile.events.is_empty());
        assert_eq!(profile.events_per_day, 0.0);
    }

    #[test]
    fn square_wave_five_cycles_ten_events() {
        // 5 full on/off cycles, plateaus of 10 samples
        let mut vs = Vec::new();
        for _ in 0..5 {
            vs.extend_from_slice(&[0.0; 10]);
            vs.extend_from_slice(&[100.0; 10]);
        }
        vs.extend_from_slice(&[0.0; 10]); // close the last cycle
        let s = series(&vs, 60);
        let params = no_filter_params();
        let states = representative_states(&s, &params).unwrap();
        let profile = detect_events(&s, &states, &params).unwrap();
        assert_eq!(profile.events.len(), 10);
    }

    #[test]
    fn debounce_suppresses_single_sample_spike() {
        let mut vs = vec![0.0; 10];
        vs.extend_from_slice(&[100.0; 3]);
        vs.push(0.0); // 1-sample spike back down
        vs.extend_from_slice(&[100.0; 10]);
        let s = series(&vs, 60);
        let params = no_filter_params();
        let states = StateSet {
            levels: vec![0.0, 100.0],
            merge_delta: 10.0,
        };
        let profile = detect_events(&s, &states, &params).unwrap();
        assert_eq!(profile.events.len(), 1);
        assert_eq!(profile.events[0].from_state, 0);
        assert_eq!(profile.events[0].to_state, 1);
    }

    #[test]
    fn events_chain_and_alternate() {
        let mut vs = Vec::new();
        for _ in 0..7 {
            vs.extend_from_slice(&[0.0; 6]);
            vs.extend_from_slice(&[100.0; 6]);
        }
        let s = series(&vs, 60);
        let params = no_filter_params();
        let states = representative_states(&s, &params).unwrap();
        let profile = detect_events(&s, &states, &params).unwrap();
        for w in profile.events.windows(2) {
            assert_eq!(w[0].to_state, w[1].from_state);
            assert_ne!(w[0].to_state, w[1].to_state);
        }
        for e in &profile.events {
            assert_ne!(e.from_state, e.to_state);
        }
    }

    #[test]
    fn events_across_gap_not_emitted() {
        // level change exactly across a large timestamp jump
        let mut ts: Vec<i64> = (0..10).map(|i| i * 60).collect();
        let mut vs = vec![0.0; 10];
        for i in 0..10 {
            ts.push(100_000 + i * 60);
            vs.push(100.0);
        }
        let s = PowerSeries::new(ts, vs, PowerType::P, 60).unwrap();
        let params = no_filter_params();
        let states = StateSet {
            levels: vec![0.0, 100.0],
            merge_delta: 10.0,
        };
        let profile = detect_events(&s, &states, &params).unwrap();
        assert!(profile.events.is_empty());
    }

    #[test]
    fn scale_covariance_of_event_count() {
        let mut vs = Vec::new();
        for _ in 0..6 {
            vs.extend_from_slice(&[10.0; 8]);
            vs.extend_from_slice(&[200.0; 8]);
        }
        let s1 = series(&vs, 60);
        let scaled: Vec<f64> = vs.iter().map(|v| v * 7.5).collect();
        let s2 = series(&scaled, 60);
        let p1 = no_filter_params();
        let p2 = EventParams {
            merge_delta: p1.merge_delta * 7.5,
            ..p1.clone()
        };
        let st1 = representative_states(&s1, &p1).unwrap();
        let st2 = representative_states(&s2, &p2).unwrap();
        let e1 = detect_events(&s1, &st1, &p1).unwrap();
        let e2 = detect_events(&s2, &st2, &p2).unwrap();
        assert_eq!(e1.events.len(), e2.events.len());
    }

    #[test]
    fn stats_min_and_avg() {
        use crate::ingestion::{Channel, Household, MeterRole};
        use std::collections::BTreeMap;

        // appliance A: 4 transitions over 1 day; appliance B: 10 over 1 day
        let day = 86400i64;
        let n = (day / 60) as usize + 1;
        let mk = |events: usize| -> PowerSeries {
            let plateau = n / (events + 1);
            let vs: Vec<f64> = (0..n)
                .map(|i| if (i / plateau).is_multiple_of(2) { 0.0 } else { 100.0 })
                .collect();
            series(&vs, 60)
        };
        let mk_channel = |id: &str, s: PowerSeries| Channel {
            meter_id: id.into(),
            label: id.into(),
            role: MeterRole::Submeter,
            series: BTreeMap::from([(PowerType::P, s)]),
        };
        let household = Household {
            dataset_name: "t".into(),
            house_id: "1".into(),
            mains: vec![],
            submeters: vec![mk_channel("a", mk(4)), mk_channel("b", mk(10))],
        };
        let stats = events_per_day_stats(&household, &no_filter_params()).unwrap();
        let ra = stats.profiles[0].events.len();
        let rb = stats.profiles[1].events.len();
        assert_eq!(stats.min_report, (ra.min(rb) as f64).floor() as u64);
        assert_eq!(stats.avg_report, ((ra + rb) as f64).round() as u64);
    }

    #[test]
    fn stats_zero_event_appliance_gives_min_zero() {
        use crate::ingestion::{Channel, Household, MeterRole};
        use std::collections::BTreeMap;

        let day = 86400i64;
        let n = (day / 60) as usize;
        let quiet = series(&vec![0.0; n], 60);
        let mut vs = Vec::new();
        while vs.len() < n {
            vs.extend_from_slice(&[0.0; 60]);
            vs.extend_from_slice(&[100.0; 60]);
        }
        vs.truncate(n);
        let active = series(&vs, 60);
        let mk = |id: &str, s: PowerSeries| Channel {
            meter_id: id.into(),
            label: id.into(),
            role: MeterRole::Submeter,
            series: BTreeMap::from([(PowerType::P, s)]),
        };
        let household = Household {
            dataset_name: "t".into(),
            house_id: "1".into(),
            mains: vec![],
            submeters: vec![mk("quiet", quiet), mk("active", active)],
        };
        let stats = events_per_day_stats(&household, &no_filter_params()).unwrap();
        assert_eq!(stats.min_report, 0);
        assert!(stats.avg_report > 0);
    }

    #[test]
    fn stats_require_submeters() {
        use crate::ingestion::Household;
        let household = Household {
            dataset_name: "t".into(),
            house_id: "1".into(),
            mains: vec![],
            submeters: vec![],
        };
        assert!(events_per_day_stats(&household, &EventParams::default()).is_err());
    }
}
