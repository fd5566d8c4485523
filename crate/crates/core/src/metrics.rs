//! Validation statistics.
//!
//! Sign convention: every difference is `measured − predicted`, so a positive
//! NMBE/MBE means the model under-predicts. Population formulas (divide by n)
//! are used throughout.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Normalized mean bias error (%).
    pub nmbe: f64,
    /// Coefficient of variation of the RMSE (%).
    pub cvrmse: f64,
    /// Coefficient of determination; `None` when the measured series has zero variance.
    pub r2: Option<f64>,
    /// Mean bias error, in the units of the input.
    pub mbe: f64,
    /// Population standard deviation of the differences.
    pub std_diff: f64,
    pub n: usize,
}

fn check_pair(measured: &[f64], predicted: &[f64]) -> Result<()> {
    if measured.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: measured.len(),
            actual: predicted.len(),
        });
    }
    if measured.len() < 2 {
        return Err(Error::InsufficientData {
            model: "metrics",
            required: 2,
            actual: measured.len(),
        });
    }
    if measured.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::invalid("metric inputs must be finite"));
    }
    Ok(())
}

pub fn compute(measured: &[f64], predicted: &[f64]) -> Result<MetricReport> {
    check_pair(measured, predicted)?;
    let n = measured.len() as f64;
    let mean_y = measured.iter().sum::<f64>() / n;
    if mean_y == 0.0 {
        return Err(Error::domain("measured mean is zero; NMBE/CVRMSE undefined"));
    }
    let diffs: Vec<f64> = measured.iter().zip(predicted).map(|(y, p)| y - p).collect();
    let mbe = diffs.iter().sum::<f64>() / n;
    let sse: f64 = diffs.iter().map(|d| d * d).sum();
    let rmse = (sse / n).sqrt();
    let ss_tot: f64 = measured.iter().map(|y| (y - mean_y).powi(2)).sum();
    let std_diff = (diffs.iter().map(|d| (d - mbe).powi(2)).sum::<f64>() / n).sqrt();
    Ok(MetricReport {
        nmbe: diffs.iter().sum::<f64>() / (n * mean_y) * 100.0,
        cvrmse: rmse / mean_y.abs() * 100.0,
        r2: (ss_tot > 0.0).then(|| 1.0 - sse / ss_tot),
        mbe,
        std_diff,
        n: measured.len(),
    })
}

/// Metrics on the running sums of both series.
pub fn cumulative_compare(measured: &[f64], predicted: &[f64]) -> Result<MetricReport> {
    check_pair(measured, predicted)?;
    compute(&prefix_sums(measured), &prefix_sums(predicted))
}

fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlandAltman {
    /// Per point: (mean of the pair, measured − predicted).
    pub points: Vec<(f64, f64)>,
    pub mean_diff: f64,
    pub std_diff: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

pub fn bland_altman(measured: &[f64], predicted: &[f64]) -> Result<BlandAltman> {
    check_pair(measured, predicted)?;
    let points: Vec<(f64, f64)> = measured
        .iter()
        .zip(predicted)
        .map(|(y, p)| (0.5 * (y + p), y - p))
        .collect();
    let n = points.len() as f64;
    let mean_diff = points.iter().map(|p| p.1).sum::<f64>() / n;
    let std_diff = (points.iter().map(|p| (p.1 - mean_diff).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BlandAltman {
        points,
        mean_diff,
        std_diff,
        lower_limit: mean_diff - 1.96 * std_diff,
        upper_limit: mean_diff + 1.96 * std_diff,
    })
}

impl BlandAltman {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["mean", "difference", "mean_diff", "lower_limit", "upper_limit"])?;
        for (m, d) in &self.points {
            out.write_record([
                m.to_string(),
                d.to_string(),
                self.mean_diff.to_string(),
                self.lower_limit.to_string(),
                self.upper_limit.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const REPORT_HEADER: [&str; 8] = ["label", "n", "nmbe_pct", "cvrmse_pct", "r2", "mbe", "std_diff", "kind"];

impl MetricReport {
    pub fn csv_row(&self, label: &str, kind: &str) -> Vec<String> {
        vec![
            label.to_string(),
            self.n.to_string(),
            format!("{:.4}", self.nmbe),
            format!("{:.4}", self.cvrmse),
            self.r2.map(|r| format!("{r:.4}")).unwrap_or_default(),
            format!("{:.4}", self.mbe),
            format!("{:.4}", self.std_diff),
            kind.to_string(),
        ]
    }

    /// One aligned line for terminal tables.
    pub fn table_line(&self, label: &str) -> String {
        let r2 = self.r2.map(|r| format!("{r:>7.3}")).unwrap_or_else(|| "    n/a".into());
        format!(
            "{label:<28} n={:<6} NMBE={:>8.3}%  CVRMSE={:>8.3}%  R2={r2}  MBE={:>9.4}",
            self.n, self.nmbe, self.cvrmse, self.mbe
        )
    }
}
