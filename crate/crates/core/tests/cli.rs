//! End-to-end checks of the command-line surface and its file formats.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nilmcomp"))
}

fn write_synth_spec(dir: &Path) -> std::path::PathBuf {
    let spec = serde_json::json!({
        "appliances": [
            {"label": "fridge", "levels_w": [0.0, 120.0], "mean_dwell_s": 1800.0},
            {"label": "heater", "levels_w": [0.0, 900.0], "mean_dwell_s": 3600.0}
        ],
        "unmetered": [],
        "noise_std_w": 0.0,
        "noise_offset_w": 0.0,
        "duration_s": 2 * 86400,
        "interval_s": 60,
        "dataset_name": "synthetic",
        "house_id": "1"
    });
    let path = dir.join("spec.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    path
}

fn generate_fixture(dir: &Path) -> std::path::PathBuf {
    let spec = write_synth_spec(dir);
    let out_dir = dir.join("house");
    let status = bin()
        .args(["synth", "--spec"])
        .arg(&spec)
        .args(["--seed", "7", "--out-dir"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    out_dir.join("manifest.json")
}

#[test]
fn nar_on_zero_noise_fixture_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_fixture(dir.path());
    let output = bin()
        .args(["nar", "--manifest"])
        .arg(&manifest)
        .args(["--power-type", "P"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.000000");
}

#[test]
fn denoised_experiment_report_has_zero_nar() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_fixture(dir.path());
    let out = dir.path().join("report.csv");
    let day = 86400i64;
    let status = bin()
        .args(["experiment", "--manifest"])
        .arg(&manifest)
        .args([
            "--algo",
            "co",
            "--train-start",
            "0",
            "--train-end",
            &day.to_string(),
            "--test-start",
            &day.to_string(),
            "--test-end",
            &(2 * day).to_string(),
            "--denoised",
            "--k",
            "2",
            "--seed",
            "0",
        ])
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.contains("nar,0.0"), "report:\n{csv}");
    assert!(csv.contains("tsr,"));
    assert!(csv.contains("evr,"));
    assert!(csv.contains("appliance,rmse_w"));
    assert!(csv.contains("fridge,"));
}

#[test]
fn summarize_matches_generator_spec() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_fixture(dir.path());
    let out = dir.path().join("summary.csv");
    let status = bin()
        .args(["summarize", "--manifest"])
        .arg(&manifest)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let field = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(field("dataset"), "synthetic");
    assert_eq!(field("house"), "1");
    assert_eq!(field("meters_with_mains"), "3");
    assert_eq!(field("meters_without_mains"), "2");
    assert_eq!(field("mains_interval_s"), "60");
    assert_eq!(field("sub_interval_s"), "60");
    assert_eq!(field("nar_p"), "0.000000");
    assert_eq!(field("nar_s"), "-");
    // 2 days minus one trailing interval
    let wall: f64 = field("duration_days_wall_clock").parse().unwrap();
    assert!((wall - (2.0 * 86400.0 - 60.0) / 86400.0).abs() < 1e-3);
}

#[test]
fn events_subcommand_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_fixture(dir.path());
    let out = dir.path().join("events.csv");
    let status = bin()
        .args(["events", "--manifest"])
        .arg(&manifest)
        .args(["--filter-width", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("label,levels,event_count,events_per_day\n"));
    assert_eq!(csv.lines().count(), 3); // header + 2 appliances
}

#[test]
fn usage_error_exits_1() {
    let output = bin().args(["nar", "--no-such-flag"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!output.stderr.is_empty());
    assert!(output.stdout.is_empty());
}

#[test]
fn data_error_exits_2() {
    let output = bin()
        .args(["nar", "--manifest", "/nonexistent/manifest.json", "--power-type", "P"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("manifest not found"));
}
