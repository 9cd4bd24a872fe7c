//! Command-line surface: dataset summaries, event statistics, NAR
//! computation, disaggregation experiments, and synthetic data generation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! stderr; data goes to files or stdout only.

use clap::{Parser, Subcommand};
use nilmcomp::disagg::DisaggParams;
use nilmcomp::events::{events_per_day_stats, EventParams};
use nilmcomp::experiment::{run_experiment, Algorithm};
use nilmcomp::ingestion::{generate_synthetic, load_household, write_household, SynthSpec};
use nilmcomp::metrics::{dataset_summary, nar, SummaryRow};
use nilmcomp::report::{emit_report, ReportFormat};
use nilmcomp::timeseries::{PowerSeries, PowerType};
use nilmcomp::NilmError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nilmcomp", version, about = "NILM dataset comparability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a one-row dataset summary CSV for a household
    Summarize {
        #[arg(long)]
        manifest: PathBuf,
        /// Restrict the NAR columns to one power type
        #[arg(long, value_parser = parse_power_type)]
        power_type: Option<PowerType>,
        #[arg(long, default_value_t = 3.0)]
        gap_factor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-appliance state levels and event statistics as CSV
    Events {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        filter_width: usize,
        #[arg(long, default_value_t = 5)]
        kmax: usize,
        #[arg(long, default_value_t = 10.0)]
        merge_delta: f64,
        #[arg(long, default_value_t = 2)]
        min_dwell: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the noise-to-aggregate ratio of a household
    Nar {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_power_type)]
        power_type: PowerType,
        /// Alignment interval in seconds; defaults to the coarsest channel
        #[arg(long)]
        interval: Option<i64>,
    },
    /// Run a train/test disaggregation experiment and write its report
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_algo)]
        algo: Algorithm,
        #[arg(long)]
        train_start: i64,
        #[arg(long)]
        train_end: i64,
        #[arg(long)]
        test_start: i64,
        #[arg(long)]
        test_end: i64,
        #[arg(long)]
        denoised: bool,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Emit markdown instead of CSV
        #[arg(long)]
        markdown: bool,
    },
    /// Generate a synthetic household from a spec JSON
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_power_type(s: &str) -> Result<PowerType, String> {
    PowerType::parse(s).ok_or_else(|| format!("unknown power type '{s}', expected P, Q or S"))
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| format!("unknown algorithm '{s}', expected co or fhmm"))
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn fmt_opt_ratio(v: &Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn power_types_str(types: &[PowerType]) -> String {
    if types.is_empty() {
        "-".into()
    } else {
        types.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("+")
    }
}

fn summary_csv(row: &SummaryRow, restrict: Option<PowerType>) -> String {
    let keep = |pt: PowerType, v: &Option<f64>| -> Option<f64> {
        match restrict {
            Some(r) if r != pt => None,
            _ => *v,
        }
    };
    let mut out = String::new();
    out.push_str(
        "dataset,house,duration_days_wall_clock,duration_days_effective,\
         meters_with_mains,meters_without_mains,mains_interval_s,sub_interval_s,\
         mains_power_types,sub_power_types,min_events_per_day,avg_events_per_day,\
         nar_p,nar_q,nar_s\n",
    );
    out.push_str(&format!(
        "{},{},{:.3},{:.3},{},{},{},{},{},{},{},{},{},{},{}\n",
        row.dataset,
        row.house,
        row.duration_days_wall_clock,
        row.duration_days_effective,
        row.meter_count_with_mains,
        row.meter_count_without_mains,
        fmt_opt(&row.mains_interval_s),
        fmt_opt(&row.sub_interval_s),
        power_types_str(&row.mains_power_types),
        power_types_str(&row.sub_power_types),
        fmt_opt(&row.min_events_per_day),
        fmt_opt(&row.avg_events_per_day),
        fmt_opt_ratio(&keep(PowerType::P, &row.nar_p)),
        fmt_opt_ratio(&keep(PowerType::Q, &row.nar_q)),
        fmt_opt_ratio(&keep(PowerType::S, &row.nar_s)),
    ));
    out
}

fn run(cli: Cli) -> Result<(), NilmError> {
    match cli.command {
        Command::Summarize {
            manifest,
            power_type,
            gap_factor,
            out,
        } => {
            let loaded = load_household(&manifest)?;
            report_dropped_rows(&loaded.log);
            let params = EventParams {
                gap_factor,
                ..EventParams::default()
            };
            let row = dataset_summary(&loaded.household, &params)?;
            std::fs::write(&out, summary_csv(&row, power_type))?;
            eprintln!("summary written to {}", out.display());
        }
        Command::Events {
            manifest,
            filter_width,
            kmax,
            merge_delta,
            min_dwell,
            out,
        } => {
            let loaded = load_household(&manifest)?;
            report_dropped_rows(&loaded.log);
            let params = EventParams {
                filter_width,
                k_max: kmax,
                merge_delta,
                min_dwell,
                ..EventParams::default()
            };
            let stats = events_per_day_stats(&loaded.household, &params)?;
            let mut csv = String::from("label,levels,event_count,events_per_day\n");
            for p in &stats.profiles {
                let levels = p
                    .state_set
                    .levels
                    .iter()
                    .map(|l| format!("{l:.1}"))
                    .collect::<Vec<_>>()
                    .join(";");
                csv.push_str(&format!(
                    "{},{},{},{:.6}\n",
                    p.label.replace(',', "_"),
                    levels,
                    p.events.len(),
                    p.events_per_day
                ));
            }
            std::fs::write(&out, csv)?;
            eprintln!(
                "events written to {} (min {} avg {} per day)",
                out.display(),
                stats.min_report,
                stats.avg_report
            );
        }
        Command::Nar {
            manifest,
            power_type,
            interval,
        } => {
            let loaded = load_household(&manifest)?;
            report_dropped_rows(&loaded.log);
            let household = &loaded.household;
            let mains = household
                .mains
                .iter()
                .find_map(|c| c.series.get(&power_type))
                .ok_or_else(|| {
                    NilmError::Metric(format!("mains has no {power_type} readings"))
                })?;
            let subs: Vec<&PowerSeries> = household
                .submeters
                .iter()
                .filter_map(|c| c.series.get(&power_type))
                .collect();
            let interval = interval.unwrap_or_else(|| {
                subs.iter()
                    .map(|s| s.nominal_interval())
                    .chain(std::iter::once(mains.nominal_interval()))
                    .max()
                    .unwrap()
            });
            let result = nar(mains, &subs, interval)?;
            if result.ratio > 1.0 {
                eprintln!("warning: NAR exceeds 1; sub-metered sum exceeds mains");
            }
            println!("{:.6}", result.ratio);
        }
        Command::Experiment {
            manifest,
            algo,
            train_start,
            train_end,
            test_start,
            test_end,
            denoised,
            k,
            seed,
            out,
            markdown,
        } => {
            let loaded = load_household(&manifest)?;
            report_dropped_rows(&loaded.log);
            let params = DisaggParams {
                event: EventParams {
                    seed,
                    ..EventParams::default()
                },
                ..DisaggParams::default()
            };
            let report = run_experiment(
                &loaded.household,
                (train_start, train_end),
                (test_start, test_end),
                algo,
                denoised,
                k,
                &params,
            )?;
            let format = if markdown { ReportFormat::Markdown } else { ReportFormat::Csv };
            std::fs::write(&out, emit_report(&report, format))?;
            eprintln!("report written to {}", out.display());
        }
        Command::Synth { spec, seed, out_dir } => {
            let spec: SynthSpec = serde_json::from_str(&std::fs::read_to_string(&spec)?)?;
            let generated = generate_synthetic(&spec, seed)?;
            let manifest = write_household(&generated.household, &out_dir)?;
            eprintln!("household written to {}", manifest.display());
        }
    }
    Ok(())
}

fn report_dropped_rows(log: &nilmcomp::ingestion::LoadLog) {
    for (file, count) in &log.dropped_rows {
        eprintln!("warning: dropped {count} malformed rows from {file}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints --help/--version to stdout with success status
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
