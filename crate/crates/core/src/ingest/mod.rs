//! Data ingestion: building-automation CSVs, weather files, 5-minute
//! resampling, daily storage aggregates and the synthetic season generator.
//!
//! All timestamps are naive local times written as `YYYY-MM-DD HH:MM`.

pub mod bas;
pub mod daily;
pub mod resample;
pub mod schedule;
pub mod synth;
pub mod weather;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).map_err(|e| Error::Parse(format!("timestamp `{s}`: {e}")))
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Round to `digits` decimals so that writing with the same precision and
/// parsing back yields the identical value.
pub fn round_to(x: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (x * k).round() / k
}

/// A row that could not be parsed, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

/// Position of each required column in a CSV header.
pub(crate) fn column_index(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    let missing: Vec<&str> = required
        .iter()
        .filter(|name| !headers.iter().any(|h| h.trim() == **name))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Parse(format!("missing columns: {}", missing.join(", "))));
    }
    Ok(required
        .iter()
        .map(|name| headers.iter().position(|h| h.trim() == *name).unwrap_or_default())
        .collect())
}
