//! Weather files: outdoor temperature, humidity and solar gain at the
//! simulation timestep.

use std::io::{Read, Write};

use chrono::NaiveDateTime;

use super::{column_index, format_timestamp, parse_timestamp, RowError};
use crate::error::{Error, Result};

pub const WEATHER_HEADER: [&str; 4] = ["timestamp", "t_oa_degc", "rh_oa_pct", "q_sol_w"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    pub t_oa: f64,
    pub rh_oa: f64,
    /// Solar gain absorbed by the zone envelope (W).
    pub q_sol: f64,
}

pub fn write_weather_csv<W: Write>(w: W, rows: &[WeatherRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(WEATHER_HEADER)?;
    for r in rows {
        out.write_record([
            format_timestamp(&r.timestamp),
            format!("{:.2}", r.t_oa),
            format!("{:.1}", r.rh_oa),
            format!("{:.1}", r.q_sol),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Strict reader: any malformed row is an error.
pub fn read_weather_csv<R: Read>(r: R) -> Result<Vec<WeatherRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let idx = column_index(rdr.headers()?, &WEATHER_HEADER)?;
    let mut rows: Vec<WeatherRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("weather line {line}: bad {} `{}`", WEATHER_HEADER[k], field(k))))
        };
        let row = WeatherRecord {
            timestamp: parse_timestamp(field(0))?,
            t_oa: num(1)?,
            rh_oa: num(2)?,
            q_sol: num(3)?,
        };
        if let Some(prev) = rows.last() {
            if row.timestamp <= prev.timestamp {
                return Err(Error::Parse(format!("weather line {line}: timestamps not increasing")));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rows that failed validation, for reporting alongside strict reads.
pub fn validate(rows: &[WeatherRecord]) -> Vec<RowError> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| !(0.0..=100.0).contains(&r.rh_oa))
        .map(|(i, r)| RowError {
            line: i + 2,
            message: format!("outdoor RH {} outside [0, 100]", r.rh_oa),
        })
        .collect()
}
