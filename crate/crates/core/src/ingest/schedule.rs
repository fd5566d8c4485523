//! Operating schedule files: setpoint, AHU status and internal gains at the
//! simulation timestep.

use std::io::{Read, Write};

use chrono::NaiveDateTime;

use super::{column_index, format_timestamp, parse_timestamp};
use crate::error::{Error, Result};

pub const SCHEDULE_HEADER: [&str; 4] = ["timestamp", "t_set_degc", "ahu_on", "q_int_w"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRecord {
    pub timestamp: NaiveDateTime,
    pub t_set: f64,
    pub ahu_on: bool,
    /// Internal sensible gains (W).
    pub q_int: f64,
}

pub fn write_schedule_csv<W: Write>(w: W, rows: &[ScheduleRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SCHEDULE_HEADER)?;
    for r in rows {
        out.write_record([
            format_timestamp(&r.timestamp),
            format!("{:.2}", r.t_set),
            if r.ahu_on { "1".into() } else { "0".into() },
            format!("{:.1}", r.q_int),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_schedule_csv<R: Read>(r: R) -> Result<Vec<ScheduleRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let idx = column_index(rdr.headers()?, &SCHEDULE_HEADER)?;
    let mut rows: Vec<ScheduleRecord> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Parse(format!(
                    "schedule line {line}: bad {} `{}`",
                    SCHEDULE_HEADER[k],
                    field(k)
                ))
            })
        };
        let ahu_on = match field(2) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse(format!(
                    "schedule line {line}: ahu_on must be 0 or 1, got `{other}`"
                )))
            }
        };
        let row = ScheduleRecord {
            timestamp: parse_timestamp(field(0))?,
            t_set: num(1)?,
            ahu_on,
            q_int: num(3)?,
        };
        if let Some(prev) = rows.last() {
            if row.timestamp <= prev.timestamp {
                return Err(Error::Parse(format!("schedule line {line}: timestamps not increasing")));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
