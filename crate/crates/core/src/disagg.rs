//! Baseline disaggregators: per-timestep combinatorial optimization and an
//! exact joint-space Viterbi factorial HMM.

use crate::error::NilmError;
use crate::events::{representative_states, EventParams};
use crate::ingestion::Household;
use crate::timeseries::{PowerSeries, PowerType};
use serde::{Deserialize, Serialize};

/// Shared training/inference knobs. Any internal randomness (k-means
/// restarts) derives from `event.seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisaggParams {
    pub event: EventParams,
    /// Levels below this snap to the 0 W off state.
    pub off_epsilon: f64,
    /// CO refuses joint level combinations beyond this count.
    pub combination_cap: usize,
    /// FHMM refuses joint state spaces beyond this count.
    pub joint_cap: usize,
    /// Variance floor for the FHMM emission model, watts squared.
    pub variance_floor: f64,
}

impl Default for DisaggParams {
    fn default() -> Self {
        DisaggParams {
            event: EventParams::default(),
            off_epsilon: 5.0,
            combination_cap: 1_000_000,
            joint_cap: 4096,
            variance_floor: 1.0,
        }
    }
}

/// Per-appliance level sets learned for combinatorial optimization.
#[derive(Debug, Clone)]
pub struct CoModel {
    pub appliances: Vec<CoAppliance>,
}

#[derive(Debug, Clone)]
pub struct CoAppliance {
    pub label: String,
    pub levels: Vec<f64>,
}

/// Per-appliance Markov chains with a shared Gaussian emission variance.
#[derive(Debug, Clone)]
pub struct FhmmModel {
    pub appliances: Vec<FhmmAppliance>,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct FhmmAppliance {
    pub label: String,
    /// Per-state emission means, ascending, nonnegative.
    pub levels: Vec<f64>,
    pub initial: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub transition: Vec<Vec<f64>>,
}

/// Per-appliance estimated consumption on a shared test grid. Values are
/// always members of the trained level sets.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub timestamps: Vec<i64>,
    pub interval_s: i64,
    pub appliances: Vec<(String, Vec<f64>)>,
}

impl Estimates {
    pub fn series_for(&self, label: &str) -> Option<PowerSeries> {
        let (_, values) = self.appliances.iter().find(|(l, _)| l == label)?;
        PowerSeries::new(
            self.timestamps.clone(),
            values.clone(),
            PowerType::P,
            self.interval_s,
        )
        .ok()
    }
}

fn training_levels(
    series: &PowerSeries,
    k: usize,
    params: &DisaggParams,
) -> Result<Vec<f64>, NilmError> {
    let event_params = EventParams {
        k_max: k,
        ..params.event.clone()
    };
    let states = representative_states(series, &event_params)?;
    let mut levels: Vec<f64> = states
        .levels
        .iter()
        .map(|&l| if l < params.off_epsilon { 0.0 } else { l })
        .collect();
    if !levels.contains(&0.0) {
        levels.insert(0, 0.0);
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    Ok(levels)
}

/// Learn per-appliance level sets from the training slice's submeters.
pub fn train_co(training: &Household, k: usize, params: &DisaggParams) -> Result<CoModel, NilmError> {
    if !(2..=5).contains(&k) {
        return Err(NilmError::Disaggregation("K must be between 2 and 5".into()));
    }
    let mut appliances = Vec::new();
    for ch in &training.submeters {
        let series = ch
            .primary_series()
            .ok_or_else(|| NilmError::Disaggregation(format!("channel {} has no series", ch.meter_id)))?;
        if series.is_empty() {
            return Err(NilmError::Disaggregation(format!(
                "empty training series for {}",
                ch.label
            )));
        }
        appliances.push(CoAppliance {
            label: ch.label.clone(),
            levels: training_levels(series, k, params)?,
        });
    }
    if appliances.is_empty() {
        return Err(NilmError::Disaggregation("no submeters to train on".into()));
    }
    Ok(CoModel { appliances })
}

/// All joint level combinations in lexicographic state-index order
/// (first appliance most significant).
fn enumerate_combinations(level_sets: &[&[f64]]) -> Vec<(f64, Vec<usize>)> {
    let mut out = Vec::new();
    let mut indices = vec![0usize; level_sets.len()];
    loop {
        let sum: f64 = indices
            .iter()
            .zip(level_sets)
            .map(|(&i, levels)| levels[i])
            .sum();
        out.push((sum, indices.clone()));
        // odometer increment, last appliance fastest
        let mut pos = level_sets.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < level_sets[pos].len() {
                break;
            }
            indices[pos] = 0;
        }
    }
}

/// At each timestep pick the state combination minimizing the absolute
/// residual against the aggregate; ties go to the lexicographically
/// smallest state-index vector.
pub fn disaggregate_co(
    model: &CoModel,
    aggregate: &PowerSeries,
    params: &DisaggParams,
) -> Result<Estimates, NilmError> {
    if aggregate.is_empty() {
        return Err(NilmError::Disaggregation("empty aggregate".into()));
    }
    let combo_count: usize = model
        .appliances
        .iter()
        .map(|a| a.levels.len())
        .try_fold(1usize, |acc, k| acc.checked_mul(k))
        .ok_or_else(|| NilmError::Disaggregation("state space too large for CO".into()))?;
    if combo_count > params.combination_cap {
        return Err(NilmError::Disaggregation("state space too large for CO".into()));
    }

    let level_sets: Vec<&[f64]> = model.appliances.iter().map(|a| a.levels.as_slice()).collect();
    let combos = enumerate_combinations(&level_sets);

    // sort by sum; the stable sort keeps the lexicographically smallest
    // combination first among equal sums
    let mut sorted = combos;
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    sorted.dedup_by(|a, b| a.0 == b.0);

    let mut per_appliance: Vec<Vec<f64>> =
        vec![Vec::with_capacity(aggregate.len()); model.appliances.len()];
    for &y in aggregate.values() {
        let idx = sorted.partition_point(|(s, _)| *s < y);
        let mut best: Option<&(f64, Vec<usize>)> = None;
        for cand in [idx.checked_sub(1).map(|i| &sorted[i]), sorted.get(idx)]
            .into_iter()
            .flatten()
        {
            best = Some(match best {
                None => cand,
                Some(b) => {
                    let rb = (y - b.0).abs();
                    let rc = (y - cand.0).abs();
                    if rc < rb || (rc == rb && cand.1 < b.1) {
                        cand
                    } else {
                        b
                    }
                }
            });
        }
        let (_, states) = best.expect("nonempty combination set");
        for (ai, &si) in states.iter().enumerate() {
            per_appliance[ai].push(level_sets[ai][si]);
        }
    }

    Ok(Estimates {
        timestamps: aggregate.timestamps().to_vec(),
        interval_s: aggregate.nominal_interval(),
        appliances: model
            .appliances
            .iter()
            .zip(per_appliance)
            .map(|(a, vals)| (a.label.clone(), vals))
            .collect(),
    })
}

/// Estimate per-appliance chains by hard nearest-level assignment with
/// add-one smoothed counting; the emission variance is the global residual
/// variance with a floor.
pub fn train_fhmm(
    training: &Household,
    k: usize,
    params: &DisaggParams,
) -> Result<FhmmModel, NilmError> {
    if !(2..=5).contains(&k) {
        return Err(NilmError::Disaggregation("K must be between 2 and 5".into()));
    }
    let mut appliances = Vec::new();
    let mut residual_sq_sum = 0.0;
    let mut residual_count = 0usize;

    for ch in &training.submeters {
        let series = ch
            .primary_series()
            .ok_or_else(|| NilmError::Disaggregation(format!("channel {} has no series", ch.meter_id)))?;
        if series.len() < 2 {
            return Err(NilmError::Disaggregation(format!(
                "training series too short for {}",
                ch.label
            )));
        }
        let levels = training_levels(series, k, params)?;
        let n_states = levels.len();

        let nearest = |v: f64| -> usize {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, &l) in levels.iter().enumerate() {
                let d = (v - l).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        };
        let assignments: Vec<usize> = series.values().iter().map(|&v| nearest(v)).collect();
        for (&v, &a) in series.values().iter().zip(&assignments) {
            residual_sq_sum += (v - levels[a]).powi(2);
            residual_count += 1;
        }

        let mut occupancy = vec![0usize; n_states];
        for &a in &assignments {
            occupancy[a] += 1;
        }
        let total = assignments.len();
        let initial: Vec<f64> = occupancy
            .iter()
            .map(|&c| (c + 1) as f64 / (total + n_states) as f64)
            .collect();

        let mut counts = vec![vec![0usize; n_states]; n_states];
        for w in assignments.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        let transition: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| {
                let row_total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| (c + 1) as f64 / (row_total + n_states) as f64)
                    .collect()
            })
            .collect();

        for row in &transition {
            let s: f64 = row.iter().sum();
            debug_assert!((s - 1.0).abs() < 1e-9, "transition row not stochastic");
        }

        appliances.push(FhmmAppliance {
            label: ch.label.clone(),
            levels,
            initial,
            transition,
        });
    }

    if appliances.is_empty() {
        return Err(NilmError::Disaggregation("no submeters to train on".into()));
    }

    let variance = if residual_count > 0 {
        (residual_sq_sum / residual_count as f64).max(params.variance_floor)
    } else {
        params.variance_floor
    };

    Ok(FhmmModel { appliances, variance })
}

/// Decompose a joint state index into per-appliance state indices, first
/// appliance most significant.
fn decompose(joint: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; sizes.len()];
    let mut rest = joint;
    for i in (0..sizes.len()).rev() {
        out[i] = rest % sizes[i];
        rest /= sizes[i];
    }
    out
}

/// Exact Viterbi decoding over the joint product chain in log space.
/// Backpointer ties resolve toward the lowest joint-state index.
pub fn disaggregate_fhmm(
    model: &FhmmModel,
    aggregate: &PowerSeries,
    params: &DisaggParams,
) -> Result<Estimates, NilmError> {
    if aggregate.is_empty() {
        return Err(NilmError::Disaggregation("empty aggregate".into()));
    }
    let sizes: Vec<usize> = model.appliances.iter().map(|a| a.levels.len()).collect();
    let n_joint: usize = sizes
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .filter(|&n| n <= params.joint_cap)
        .ok_or_else(|| {
            NilmError::Disaggregation("joint state space too large; reduce appliances or K".into())
        })?;

    let states: Vec<Vec<usize>> = (0..n_joint).map(|j| decompose(j, &sizes)).collect();
    let mean_sum: Vec<f64> = states
        .iter()
        .map(|s| {
            s.iter()
                .zip(&model.appliances)
                .map(|(&si, a)| a.levels[si])
                .sum()
        })
        .collect();
    let log_initial: Vec<f64> = states
        .iter()
        .map(|s| {
            s.iter()
                .zip(&model.appliances)
                .map(|(&si, a)| a.initial[si].ln())
                .sum()
        })
        .collect();
    // joint log transition, from-major
    let log_trans: Vec<Vec<f64>> = (0..n_joint)
        .map(|from| {
            (0..n_joint)
                .map(|to| {
                    states[from]
                        .iter()
                        .zip(&states[to])
                        .zip(&model.appliances)
                        .map(|((&f, &t), a)| a.transition[f][t].ln())
                        .sum()
                })
                .collect()
        })
        .collect();

    let var = model.variance;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let emission = |y: f64, j: usize| log_norm - (y - mean_sum[j]).powi(2) / (2.0 * var);

    let ys = aggregate.values();
    let t_len = ys.len();
    let mut delta: Vec<f64> = (0..n_joint)
        .map(|j| log_initial[j] + emission(ys[0], j))
        .collect();
    let mut backpointers: Vec<Vec<usize>> = Vec::with_capacity(t_len.saturating_sub(1));

    for &y in &ys[1..] {
        let mut next = vec![f64::NEG_INFINITY; n_joint];
        let mut back = vec![0usize; n_joint];
        for to in 0..n_joint {
            let mut best_score = f64::NEG_INFINITY;
            let mut best_from = 0usize;
            for from in 0..n_joint {
                let score = delta[from] + log_trans[from][to];
                if score > best_score {
                    best_score = score;
                    best_from = from;
                }
            }
            next[to] = best_score + emission(y, to);
            back[to] = best_from;
        }
        delta = next;
        backpointers.push(back);
    }

    let mut best_last = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (j, &d) in delta.iter().enumerate() {
        if d > best_score {
            best_score = d;
            best_last = j;
        }
    }

    let mut path = vec![best_last; t_len];
    for t in (0..t_len - 1).rev() {
        path[t] = backpointers[t][path[t + 1]];
    }

    let mut per_appliance: Vec<Vec<f64>> =
        vec![Vec::with_capacity(t_len); model.appliances.len()];
    for &j in &path {
        for (ai, &si) in states[j].iter().enumerate() {
            per_appliance[ai].push(model.appliances[ai].levels[si]);
        }
    }

    Ok(Estimates {
        timestamps: aggregate.timestamps().to_vec(),
        interval_s: aggregate.nominal_interval(),
        appliances: model
            .appliances
            .iter()
            .zip(per_appliance)
            .map(|(a, vals)| (a.label.clone(), vals))
            .collect(),
    })
}

/// Total joint Viterbi log-probability of a given joint path, for checks.
pub fn joint_path_log_prob(model: &FhmmModel, ys: &[f64], path: &[usize]) -> f64 {
    let sizes: Vec<usize> = model.appliances.iter().map(|a| a.levels.len()).collect();
    let var = model.variance;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let mut lp = 0.0;
    for (t, (&j, &y)) in path.iter().zip(ys).enumerate() {
        let s = decompose(j, &sizes);
        let mean: f64 = s
            .iter()
            .zip(&model.appliances)
            .map(|(&si, a)| a.levels[si])
            .sum();
        if t == 0 {
            for (&si, a) in s.iter().zip(&model.appliances) {
                lp += a.initial[si].ln();
            }
        } else {
            let prev = decompose(path[t - 1], &sizes);
            for ((&pi, &si), a) in prev.iter().zip(&s).zip(&model.appliances) {
                lp += a.transition[pi][si].ln();
            }
        }
        lp += log_norm - (y - mean).powi(2) / (2.0 * var);
    }
    lp
}
