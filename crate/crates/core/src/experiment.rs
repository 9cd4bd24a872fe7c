//! Train/test experiment protocol: noised vs denoised testing with RMSE
//! reported alongside the NAR, TSR and EVR of the run.

use crate::disagg::{
    disaggregate_co, disaggregate_fhmm, train_co, train_fhmm, DisaggParams, Estimates,
};
use crate::error::NilmError;
use crate::events::profile_series;
use crate::ingestion::Household;
use crate::metrics::{evr, nar, rmse, tsr};
use crate::report::{EvaluationReport, ParamsEcho};
use crate::timeseries::{
    effective_duration, resample_to_grid, sum_channels, FillPolicy, PowerSeries,
};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Co,
    Fhmm,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Co => "co",
            Algorithm::Fhmm => "fhmm",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "co" => Some(Algorithm::Co),
            "fhmm" => Some(Algorithm::Fhmm),
            _ => None,
        }
    }
}

/// A trained model of either family, reusable across test windows.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Co(crate::disagg::CoModel),
    Fhmm(crate::disagg::FhmmModel),
}

/// Train on a window of the household's submeters.
pub fn train(
    household: &Household,
    train_window: (i64, i64),
    algorithm: Algorithm,
    k: usize,
    params: &DisaggParams,
) -> Result<TrainedModel, NilmError> {
    let (start, end) = train_window;
    if start >= end {
        return Err(NilmError::Disaggregation("empty train window".into()));
    }
    let slice = household.slice(start, end);
    Ok(match algorithm {
        Algorithm::Co => TrainedModel::Co(train_co(&slice, k, params)?),
        Algorithm::Fhmm => TrainedModel::Fhmm(train_fhmm(&slice, k, params)?),
    })
}

fn restrict(series: &PowerSeries, keep: &BTreeSet<i64>) -> PowerSeries {
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in series.timestamps().iter().zip(series.values()) {
        if keep.contains(&t) {
            ts.push(t);
            vs.push(v);
        }
    }
    PowerSeries::new(ts, vs, series.power_type(), series.nominal_interval())
        .expect("restriction preserves validity")
}

/// Coarsest nominal interval across mains and submeters; cross-channel
/// operations align to it.
pub fn alignment_interval(household: &Household) -> i64 {
    household
        .mains
        .iter()
        .chain(household.submeters.iter())
        .filter_map(|c| c.primary_series().map(|s| s.nominal_interval()))
        .max()
        .unwrap_or(1)
}

/// Evaluate an already-trained model on one test window.
pub fn evaluate(
    household: &Household,
    model: &TrainedModel,
    train_window: (i64, i64),
    test_window: (i64, i64),
    denoised: bool,
    k: usize,
    params: &DisaggParams,
) -> Result<EvaluationReport, NilmError> {
    let (test_start, test_end) = test_window;
    let (train_start, train_end) = train_window;
    if test_start >= test_end {
        return Err(NilmError::Disaggregation("empty test window".into()));
    }
    if train_start < test_end && test_start < train_end {
        return Err(NilmError::Disaggregation("train/test overlap".into()));
    }

    let interval = alignment_interval(household);
    let test_h = household.slice(test_start, test_end);

    let truth_raw: Vec<(&str, &PowerSeries)> = test_h
        .submeters
        .iter()
        .filter_map(|c| c.primary_series().map(|s| (c.label.as_str(), s)))
        .collect();
    if truth_raw.is_empty() || truth_raw.iter().any(|(_, s)| s.is_empty()) {
        return Err(NilmError::Disaggregation("empty test window".into()));
    }

    let aggregate = if denoised {
        let subs: Vec<&PowerSeries> = truth_raw.iter().map(|(_, s)| *s).collect();
        sum_channels(&subs, interval)?
    } else {
        let mains: Vec<&PowerSeries> = test_h
            .mains
            .iter()
            .filter_map(|c| c.primary_series())
            .filter(|s| !s.is_empty())
            .collect();
        if mains.is_empty() {
            return Err(NilmError::Disaggregation("mains required".into()));
        }
        sum_channels(&mains, interval)?
    };
    if aggregate.is_empty() {
        return Err(NilmError::Disaggregation("empty test aggregate".into()));
    }

    let anchor = aggregate.timestamps()[0];
    let policy_for = |s: &PowerSeries| {
        if interval >= s.nominal_interval() {
            FillPolicy::MeanDownsample
        } else {
            FillPolicy::ForwardFillBounded(3)
        }
    };
    let truths: Vec<(String, PowerSeries)> = truth_raw
        .iter()
        .map(|(label, s)| {
            resample_to_grid(s, anchor, interval, policy_for(s)).map(|r| (label.to_string(), r))
        })
        .collect::<Result<_, _>>()?;

    let mut grid: BTreeSet<i64> = aggregate.timestamps().iter().copied().collect();
    for (_, t) in &truths {
        let set: BTreeSet<i64> = t.timestamps().iter().copied().collect();
        grid = grid.intersection(&set).copied().collect();
    }
    if grid.is_empty() {
        return Err(NilmError::Disaggregation("no overlapping test coverage".into()));
    }
    let aggregate = restrict(&aggregate, &grid);
    let truths: Vec<(String, PowerSeries)> = truths
        .iter()
        .map(|(l, s)| (l.clone(), restrict(s, &grid)))
        .collect();

    let estimates: Estimates = match model {
        TrainedModel::Co(m) => disaggregate_co(m, &aggregate, params)?,
        TrainedModel::Fhmm(m) => disaggregate_fhmm(m, &aggregate, params)?,
    };

    let mut appliance_rmse = Vec::new();
    for (label, truth) in &truths {
        let est = estimates
            .series_for(label)
            .ok_or_else(|| NilmError::Disaggregation(format!("no estimate for {label}")))?;
        appliance_rmse.push((label.clone(), rmse(&est, truth)?));
    }

    let truth_refs: Vec<&PowerSeries> = truths.iter().map(|(_, s)| s).collect();
    let nar_value = nar(&aggregate, &truth_refs, interval)?.ratio;

    // TSR over effective durations of the reference signal
    let reference = household
        .mains
        .first()
        .and_then(|c| c.primary_series())
        .or_else(|| household.submeters.first().and_then(|c| c.primary_series()))
        .ok_or_else(|| NilmError::Disaggregation("household has no series".into()))?;
    let total_eff = effective_duration(reference, params.event.gap_factor);
    let test_eff = effective_duration(
        &reference.slice(test_start, test_end),
        params.event.gap_factor,
    );
    let tsr_value = tsr(test_eff, total_eff)?;

    // EVR with identical event params on test slice and full series
    let mut test_events = 0usize;
    let mut total_events = 0usize;
    for ch in &household.submeters {
        if let Some(full) = ch.primary_series() {
            total_events += profile_series(&ch.label, full, &params.event)?.events.len();
            let sliced = full.slice(test_start, test_end);
            if !sliced.is_empty() {
                test_events += profile_series(&ch.label, &sliced, &params.event)?.events.len();
            }
        }
    }
    let evr_value = evr(test_events, total_events)?;

    Ok(EvaluationReport {
        dataset: household.dataset_name.clone(),
        house: household.house_id.clone(),
        algorithm: match model {
            TrainedModel::Co(_) => "co".into(),
            TrainedModel::Fhmm(_) => "fhmm".into(),
        },
        denoised,
        nar: nar_value,
        tsr: tsr_value,
        evr: evr_value,
        appliance_rmse,
        params: ParamsEcho {
            algorithm: match model {
                TrainedModel::Co(_) => "co".into(),
                TrainedModel::Fhmm(_) => "fhmm".into(),
            },
            denoised,
            k,
            train_start,
            train_end,
            test_start,
            test_end,
            interval_s: interval,
            disagg: params.clone(),
        },
        tool_version: env!("CARGO_PKG_VERSION").into(),
    })
}

/// Train on the train window and evaluate on the test window in one call.
pub fn run_experiment(
    household: &Household,
    train_window: (i64, i64),
    test_window: (i64, i64),
    algorithm: Algorithm,
    denoised: bool,
    k: usize,
    params: &DisaggParams,
) -> Result<EvaluationReport, NilmError> {
    let model = train(household, train_window, algorithm, k, params)?;
    evaluate(household, &model, train_window, test_window, denoised, k, params)
}
