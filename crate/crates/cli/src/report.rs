//! Per-image quality tables. PSNR is stored rounded to 1e-6 dB and SSIM to
//! 1e-8; averages are the plain mean of the stored values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    /// PSNR of the degraded input against the truth, when shapes agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_psnr: Option<f64>,
    pub runtime_s: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub psnr: f64,
    pub ssim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_psnr: Option<f64>,
    pub runtime_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub average: Average,
}

pub fn round_psnr(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn round_ssim(v: f64) -> f64 {
    (v * 1e8).round() / 1e8
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Mean of an optional column, present only when every row has a value.
fn mean_opt(rows: &[ReportRow], f: impl Fn(&ReportRow) -> Option<f64>) -> Option<f64> {
    let values: Option<Vec<f64>> = rows.iter().map(f).collect();
    values.map(|v| mean(v.into_iter()))
}

impl EvalReport {
    /// Rows are sorted by name; values are rounded before averaging.
    pub fn new(mut rows: Vec<ReportRow>) -> Result<EvalReport> {
        if rows.is_empty() {
            return Err(CliError::Config("no images to report".into()));
        }
        rows.sort_by(|a, b| a.name.cmp(&b.name));
        for r in &mut rows {
            r.psnr = round_psnr(r.psnr);
            r.ssim = round_ssim(r.ssim);
            r.input_psnr = r.input_psnr.map(round_psnr);
        }
        let average = Average {
            psnr: mean(rows.iter().map(|r| r.psnr)),
            ssim: mean(rows.iter().map(|r| r.ssim)),
            input_psnr: mean_opt(&rows, |r| r.input_psnr),
            runtime_s: mean_opt(&rows, |r| r.runtime_s),
        };
        Ok(EvalReport { rows, average })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text table for terminals.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain([7])
            .max()
            .unwrap_or(7);
        let with_input = self.average.input_psnr.is_some();
        let mut out = String::new();
        let _ = write!(out, "{:<width$}  {:>9}  {:>7}", "image", "psnr_db", "ssim");
        if with_input {
            let _ = write!(out, "  {:>9}", "input_db");
        }
        let _ = writeln!(out, "  {:>9}  {:>5}", "time_s", "iters");
        let opt_f = |v: Option<f64>| v.map_or("-".to_string(), |t| format!("{t:.3}"));
        let opt_u = |v: Option<usize>| v.map_or("-".to_string(), |t| t.to_string());
        for r in &self.rows {
            let _ = write!(out, "{:<width$}  {:>9.3}  {:>7.4}", r.name, r.psnr, r.ssim);
            if with_input {
                let _ = write!(out, "  {:>9}", opt_f(r.input_psnr));
            }
            let _ = writeln!(
                out,
                "  {:>9}  {:>5}",
                opt_f(r.runtime_s),
                opt_u(r.iterations)
            );
        }
        let a = &self.average;
        let _ = write!(
            out,
            "{:<width$}  {:>9.3}  {:>7.4}",
            "Average", a.psnr, a.ssim
        );
        if with_input {
            let _ = write!(out, "  {:>9}", opt_f(a.input_psnr));
        }
        let _ = writeln!(out, "  {:>9}  {:>5}", opt_f(a.runtime_s), "");
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, self.to_json()).map_err(|e| CliError::io(json, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&txt, self.to_table()).map_err(|e| CliError::io(txt, e))
    }
}
