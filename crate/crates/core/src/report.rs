//! Unified evaluation report: accuracy numbers always travel with the
//! context ratios (NAR, TSR, EVR) that make them comparable.

use crate::disagg::DisaggParams;
use serde::{Deserialize, Serialize};

/// Every knob needed to rerun an experiment bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub algorithm: String,
    pub denoised: bool,
    pub k: usize,
    pub train_start: i64,
    pub train_end: i64,
    pub test_start: i64,
    pub test_end: i64,
    pub interval_s: i64,
    pub disagg: DisaggParams,
}

/// One experiment's full result.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub house: String,
    pub algorithm: String,
    pub denoised: bool,
    pub nar: f64,
    pub tsr: f64,
    pub evr: f64,
    /// Per-appliance RMSE in watts.
    pub appliance_rmse: Vec<(String, f64)>,
    pub params: ParamsEcho,
    pub tool_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c == ',' || c == '\n' || c == '|' { '_' } else { c })
        .collect()
}

impl EvaluationReport {
    /// The metric rows alone; replaying an experiment from its params echo
    /// must reproduce these bytes exactly.
    pub fn metrics_block_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nar,{:.6}\n", self.nar));
        out.push_str(&format!("tsr,{:.6}\n", self.tsr));
        out.push_str(&format!("evr,{:.6}\n", self.evr));
        out.push_str("appliance,rmse_w\n");
        for (label, rmse) in &self.appliance_rmse {
            out.push_str(&format!("{},{:.1}\n", sanitize_label(label), rmse));
        }
        out
    }
}

/// Render a report as CSV (metadata block then per-appliance block) or as
/// two markdown pipe tables. Ratios carry 6 decimals, RMSE 1 decimal.
pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str("key,value\n");
            out.push_str(&format!("dataset,{}\n", sanitize_label(&report.dataset)));
            out.push_str(&format!("house,{}\n", sanitize_label(&report.house)));
            out.push_str(&format!("algorithm,{}\n", report.algorithm));
            out.push_str(&format!("denoised,{}\n", report.denoised));
            out.push_str(&format!("tool_version,{}\n", report.tool_version));
            out.push_str(&format!(
                "params_json,{}\n",
                serde_json::to_string(&report.params)
                    .unwrap_or_default()
                    .replace(',', ";")
            ));
            out.push_str(&report.metrics_block_csv());
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| key | value |\n|---|---|\n");
            out.push_str(&format!("| dataset | {} |\n", sanitize_label(&report.dataset)));
            out.push_str(&format!("| house | {} |\n", sanitize_label(&report.house)));
            out.push_str(&format!("| algorithm | {} |\n", report.algorithm));
            out.push_str(&format!("| denoised | {} |\n", report.denoised));
            out.push_str(&format!("| nar | {:.6} |\n", report.nar));
            out.push_str(&format!("| tsr | {:.6} |\n", report.tsr));
            out.push_str(&format!("| evr | {:.6} |\n", report.evr));
            out.push_str(&format!("| tool_version | {} |\n", report.tool_version));
            out.push('\n');
            out.push_str("| appliance | rmse_w |\n|---|---|\n");
            for (label, rmse) in &report.appliance_rmse {
                out.push_str(&format!("| {} | {:.1} |\n", sanitize_label(label), rmse));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> EvaluationReport {
        EvaluationReport {
            dataset: "synthetic".into(),
            house: "1".into(),
            algorithm: "co".into(),
            denoised: true,
            nar: 0.0,
            tsr: 0.259,
            evr: 0.31,
            appliance_rmse: vec![("fridge".into(), 3.53553), ("heater, big".into(), 12.04)],
            params: ParamsEcho {
                algorithm: "co".into(),
                denoised: true,
                k: 2,
                train_start: 0,
                train_end: 100,
                test_start: 100,
                test_end: 200,
                interval_s: 60,
                disagg: DisaggParams::default(),
            },
            tool_version: "0.1.0".into(),
        }
    }

    #[test]
    fn csv_rounding_rules() {
        let csv = emit_report(&sample_report(), ReportFormat::Csv);
        assert!(csv.contains("tsr,0.259000\n"));
        assert!(csv.contains("nar,0.000000\n"));
        assert!(csv.contains("fridge,3.5\n"));
    }

    #[test]
    fn markdown_rounding_rules() {
        let md = emit_report(&sample_report(), ReportFormat::Markdown);
        assert!(md.contains("| fridge | 3.5 |"));
        assert!(md.contains("| tsr | 0.259000 |"));
    }

    #[test]
    fn labels_sanitized_for_csv() {
        let csv = emit_report(&sample_report(), ReportFormat::Csv);
        for line in csv.lines() {
            assert!(line.matches(',').count() <= 1, "ambiguous csv line: {line}");
        }
        assert!(csv.contains("heater_ big,12.0\n"));
    }
}
