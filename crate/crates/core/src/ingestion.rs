//! Household loading from manifest + per-channel CSV files, writing in the
//! same layout, and synthetic household generation.

use crate::error::NilmError;
use crate::timeseries::{PowerSeries, PowerType};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeterRole {
    Mains,
    Submeter,
}

/// One metered signal: a mains or sub-meter channel with a series per
/// available AC power type.
#[derive(Debug, Clone)]
pub struct Channel {
    pub meter_id: String,
    pub label: String,
    pub role: MeterRole,
    pub series: BTreeMap<PowerType, PowerSeries>,
}

impl Channel {
    /// Preferred series for single-signal operations: P if present,
    /// otherwise the first available power type.
    pub fn primary_series(&self) -> Option<&PowerSeries> {
        self.series
            .get(&PowerType::P)
            .or_else(|| self.series.values().next())
    }
}

/// One house: mains channels, sub-meter channels, and identifying metadata.
#[derive(Debug, Clone)]
pub struct Household {
    pub dataset_name: String,
    pub house_id: String,
    pub mains: Vec<Channel>,
    pub submeters: Vec<Channel>,
}

impl Household {
    /// Restrict every channel to samples in `[start, end)`.
    pub fn slice(&self, start: i64, end: i64) -> Household {
        let cut = |chs: &[Channel]| {
            chs.iter()
                .map(|c| Channel {
                    meter_id: c.meter_id.clone(),
                    label: c.label.clone(),
                    role: c.role,
                    series: c
                        .series
                        .iter()
                        .map(|(&pt, s)| (pt, s.slice(start, end)))
                        .collect(),
                })
                .collect()
        };
        Household {
            dataset_name: self.dataset_name.clone(),
            house_id: self.house_id.clone(),
            mains: cut(&self.mains),
            submeters: cut(&self.submeters),
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest schema

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub house_id: String,
    pub channels: Vec<ManifestChannel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestChannel {
    pub meter_id: String,
    pub label: String,
    pub role: MeterRole,
    /// Power type ("P"/"Q"/"S") to relative CSV path.
    pub files: BTreeMap<String, String>,
    pub nominal_interval_s: i64,
}

/// Per-file counts of rows dropped during parsing (unparseable or
/// out-of-order).
#[derive(Debug, Clone, Default)]
pub struct LoadLog {
    pub dropped_rows: BTreeMap<String, usize>,
}

impl LoadLog {
    pub fn total_dropped(&self) -> usize {
        self.dropped_rows.values().sum()
    }
}

/// A household together with its load log.
#[derive(Debug, Clone)]
pub struct LoadedHousehold {
    pub household: Household,
    pub log: LoadLog,
}

/// Load a household from a JSON manifest and its referenced channel CSVs.
/// Malformed rows are skipped and counted, never fatal.
pub fn load_household(manifest_path: &Path) -> Result<LoadedHousehold, NilmError> {
    if !manifest_path.exists() {
        return Err(NilmError::Ingestion(format!(
            "manifest not found: {}",
            manifest_path.display()
        )));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut log = LoadLog::default();
    let mut mains = Vec::new();
    let mut submeters = Vec::new();

    for mc in &manifest.channels {
        let mut series = BTreeMap::new();
        for (pt_str, rel) in &mc.files {
            let pt = PowerType::parse(pt_str).ok_or_else(|| {
                NilmError::Ingestion(format!("unknown power type '{pt_str}' in manifest"))
            })?;
            let path = base.join(rel);
            if !path.exists() {
                return Err(NilmError::Ingestion(format!(
                    "channel file missing: {}",
                    path.display()
                )));
            }
            let (s, dropped) = read_channel_csv(&path, pt, mc.nominal_interval_s)?;
            if dropped > 0 {
                log.dropped_rows.insert(rel.clone(), dropped);
            }
            series.insert(pt, s);
        }
        if series.is_empty() {
            return Err(NilmError::Ingestion(format!(
                "channel {} declares no power types",
                mc.meter_id
            )));
        }
        let channel = Channel {
            meter_id: mc.meter_id.clone(),
            label: mc.label.clone(),
            role: mc.role,
            series,
        };
        match mc.role {
            MeterRole::Mains => mains.push(channel),
            MeterRole::Submeter => submeters.push(channel),
        }
    }

    if mains.is_empty() {
        return Err(NilmError::Ingestion("no mains channel".into()));
    }

    Ok(LoadedHousehold {
        household: Household {
            dataset_name: manifest.dataset_name,
            house_id: manifest.house_id,
            mains,
            submeters,
        },
        log,
    })
}

/// Parse one channel CSV (`timestamp,power`, integer Unix seconds, up to 3
/// fraction digits). Returns the series and the dropped-row count.
fn read_channel_csv(
    path: &Path,
    power_type: PowerType,
    nominal_interval: i64,
) -> Result<(PowerSeries, usize), NilmError> {
    let content = fs::read_to_string(path)?;
    let mut timestamps: Vec<i64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dropped = 0usize;

    for (i, line) in content.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(ts, v)| {
            let ts: i64 = ts.trim().parse().ok()?;
            let v: f64 = v.trim().parse().ok()?;
            if v.is_finite() {
                Some((ts, v))
            } else {
                None
            }
        });
        match parsed {
            Some((ts, v)) => {
                if timestamps.last().is_some_and(|&prev| ts <= prev) {
                    dropped += 1; // out of order, drop the later-arriving row
                } else if v < 0.0 && power_type != PowerType::Q {
                    dropped += 1;
                } else {
                    timestamps.push(ts);
                    values.push(v);
                }
            }
            None => dropped += 1,
        }
    }

    let series = PowerSeries::new(timestamps, values, power_type, nominal_interval)?;
    Ok((series, dropped))
}

/// Write a household to `dir` in the canonical layout: `manifest.json` plus
/// one CSV per channel per power type, values at 3 decimal places.
pub fn write_household(household: &Household, dir: &Path) -> Result<PathBuf, NilmError> {
    fs::create_dir_all(dir)?;
    let mut channels = Vec::new();
    for ch in household.mains.iter().chain(household.submeters.iter()) {
        let mut files = BTreeMap::new();
        let nominal = ch
            .series
            .values()
            .next()
            .map(|s| s.nominal_interval())
            .unwrap_or(1);
        for (&pt, series) in &ch.series {
            let rel = format!("{}_{}.csv", sanitize(&ch.meter_id), pt.as_str());
            let mut out = String::from("timestamp,power\n");
            for (&t, &v) in series.timestamps().iter().zip(series.values()) {
                out.push_str(&format!("{t},{v:.3}\n"));
            }
            fs::write(dir.join(&rel), out)?;
            files.insert(pt.as_str().to_string(), rel);
        }
        channels.push(ManifestChannel {
            meter_id: ch.meter_id.clone(),
            label: ch.label.clone(),
            role: ch.role,
            files,
            nominal_interval_s: nominal,
        });
    }
    let manifest = Manifest {
        dataset_name: household.dataset_name.clone(),
        house_id: household.house_id.clone(),
        channels,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic generation

/// One synthetic appliance: its power levels and a mean state dwell time.
/// Exactly one level must be 0 W (the off state).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplianceSpec {
    pub label: String,
    pub levels_w: Vec<f64>,
    pub mean_dwell_s: f64,
}

/// Generative model parameters: metered appliances, optional unmetered
/// appliances folded into mains only, and a truncated-Gaussian noise term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub appliances: Vec<ApplianceSpec>,
    #[serde(default)]
    pub unmetered: Vec<ApplianceSpec>,
    pub noise_std_w: f64,
    #[serde(default)]
    pub noise_offset_w: f64,
    pub duration_s: i64,
    pub interval_s: i64,
    #[serde(default = "default_dataset_name")]
    pub dataset_name: String,
    #[serde(default = "default_house_id")]
    pub house_id: String,
}

fn default_dataset_name() -> String {
    "synthetic".into()
}

fn default_house_id() -> String {
    "1".into()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), NilmError> {
        for a in self.appliances.iter().chain(self.unmetered.iter()) {
            if a.levels_w.len() < 2 {
                return Err(NilmError::Ingestion(format!(
                    "appliance needs at least 2 states: {}",
                    a.label
                )));
            }
            let off_count = a.levels_w.iter().filter(|&&l| l == 0.0).count();
            if off_count != 1 {
                return Err(NilmError::Ingestion(format!(
                    "appliance {} must have exactly one 0 W off state",
                    a.label
                )));
            }
            if a.mean_dwell_s <= 0.0 {
                return Err(NilmError::Ingestion(format!(
                    "appliance {} needs positive mean dwell",
                    a.label
                )));
            }
        }
        if self.noise_std_w < 0.0 {
            return Err(NilmError::Ingestion("noise_std must be >= 0".into()));
        }
        if self.noise_offset_w < 0.0 {
            return Err(NilmError::Ingestion("noise_offset must be >= 0".into()));
        }
        if self.duration_s <= 0 || self.interval_s <= 0 {
            return Err(NilmError::Ingestion("duration and interval must be positive".into()));
        }
        Ok(())
    }
}

/// A generated household plus the generator's own transition log, the
/// ground truth for event-count checks.
#[derive(Debug, Clone)]
pub struct SyntheticHousehold {
    pub household: Household,
    /// Realized hidden-chain state transitions per metered appliance label.
    pub transition_counts: BTreeMap<String, usize>,
}

/// Generate a household from the spec: each appliance is a first-order
/// Markov chain over its levels; mains is the metered sum plus unmetered
/// signals plus offset plus half-normal noise. Deterministic per seed.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SyntheticHousehold, NilmError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (spec.duration_s / spec.interval_s) as usize;
    if n == 0 {
        return Err(NilmError::Ingestion("duration shorter than one interval".into()));
    }
    let timestamps: Vec<i64> = (0..n as i64).map(|i| i * spec.interval_s).collect();

    let mut mains_values = vec![spec.noise_offset_w; n];
    let mut submeters = Vec::new();
    let mut transition_counts = BTreeMap::new();

    for (ai, a) in spec.appliances.iter().enumerate() {
        let (values, transitions) = simulate_appliance(a, spec.interval_s, n, &mut rng);
        for (m, v) in mains_values.iter_mut().zip(&values) {
            *m += v;
        }
        transition_counts.insert(a.label.clone(), transitions);
        let series = PowerSeries::new(timestamps.clone(), values, PowerType::P, spec.interval_s)?;
        submeters.push(Channel {
            meter_id: format!("sub{}", ai + 1),
            label: a.label.clone(),
            role: MeterRole::Submeter,
            series: BTreeMap::from([(PowerType::P, series)]),
        });
    }

    for a in &spec.unmetered {
        let (values, _) = simulate_appliance(a, spec.interval_s, n, &mut rng);
        for (m, v) in mains_values.iter_mut().zip(&values) {
            *m += v;
        }
    }

    if spec.noise_std_w > 0.0 {
        for m in mains_values.iter_mut() {
            // half-normal: Gaussian truncated at 0
            let g: f64 = sample_standard_normal(&mut rng) * spec.noise_std_w;
            *m += g.abs();
        }
    }

    let mains_series = PowerSeries::new(timestamps, mains_values, PowerType::P, spec.interval_s)?;
    let mains = Channel {
        meter_id: "mains".into(),
        label: "mains".into(),
        role: MeterRole::Mains,
        series: BTreeMap::from([(PowerType::P, mains_series)]),
    };

    Ok(SyntheticHousehold {
        household: Household {
            dataset_name: spec.dataset_name.clone(),
            house_id: spec.house_id.clone(),
            mains: vec![mains],
            submeters,
        },
        transition_counts,
    })
}

/// First-order Markov chain: stay with probability `1 - interval/mean_dwell`
/// (geometric dwell), otherwise jump uniformly to another state. Starts off.
fn simulate_appliance(
    spec: &ApplianceSpec,
    interval: i64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, usize) {
    let k = spec.levels_w.len();
    let p_leave = (interval as f64 / spec.mean_dwell_s).min(1.0);
    let off_state = spec.levels_w.iter().position(|&l| l == 0.0).unwrap();

    let mut state = off_state;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(spec.levels_w[state]);
        if rng.gen::<f64>() < p_leave {
            let mut next = rng.gen_range(0..k - 1);
            if next >= state {
                next += 1;
            }
            state = next;
        }
    }
    // transitions realized within the emitted window; a state change after
    // the final sample is not observable and not counted
    let transitions = values.windows(2).filter(|w| w[0] != w[1]).count();
    (values, transitions)
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
