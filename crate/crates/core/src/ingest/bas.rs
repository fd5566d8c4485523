//! Building-automation point log.
//!
//! | column | point | unit |
//! |---|---|---|
//! | `#T1` | exhaust air temperature | °C |
//! | `#T2` | return air temperature | °C |
//! | `#T3` | outdoor air temperature | °C |
//! | `#T4` | mixed air temperature | °C |
//! | `#T5` | supply air temperature | °C |
//! | `#T6` | setpoint temperature | °C |
//! | `#H1` | return air humidity | % |
//! | `#S1` | supply fan signal | 0/1 |
//! | `#V1` | cooling valve position | % |
//! | `#T7` | chilled water supply temperature | °C |
//! | `#T8` | chilled water return temperature | °C |
//! | `#TE3` | storage upper layer temperature | °C |
//! | `#TE15` | storage lower layer temperature | °C |
//!
//! plus a leading `timestamp` column. Temperatures are written to 0.01 °C,
//! humidity and valve position to 0.1 %.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use super::{column_index, format_timestamp, parse_timestamp, RowError};
use crate::error::Result;

pub const BAS_HEADER: [&str; 14] = [
    "timestamp",
    "#T1",
    "#T2",
    "#T3",
    "#T4",
    "#T5",
    "#T6",
    "#H1",
    "#S1",
    "#V1",
    "#T7",
    "#T8",
    "#TE3",
    "#TE15",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasRecord {
    pub timestamp: NaiveDateTime,
    pub t1_ea: f64,
    pub t2_ra: f64,
    pub t3_oa: f64,
    pub t4_ma: f64,
    pub t5_sa: f64,
    pub t6_set: f64,
    pub h1_ra: f64,
    pub s1_fan: bool,
    pub v1_valve: f64,
    pub t7_chws: f64,
    pub t8_chwr: f64,
    pub te3_top: f64,
    pub te15_bottom: f64,
}

impl BasRecord {
    /// Analog channels in header order (signal excluded).
    pub fn analog(&self) -> [f64; 12] {
        [
            self.t1_ea,
            self.t2_ra,
            self.t3_oa,
            self.t4_ma,
            self.t5_sa,
            self.t6_set,
            self.h1_ra,
            self.v1_valve,
            self.t7_chws,
            self.t8_chwr,
            self.te3_top,
            self.te15_bottom,
        ]
    }

    pub fn from_analog(timestamp: NaiveDateTime, a: [f64; 12], s1_fan: bool) -> Self {
        Self {
            timestamp,
            t1_ea: a[0],
            t2_ra: a[1],
            t3_oa: a[2],
            t4_ma: a[3],
            t5_sa: a[4],
            t6_set: a[5],
            h1_ra: a[6],
            s1_fan,
            v1_valve: a[7],
            t7_chws: a[8],
            t8_chwr: a[9],
            te3_top: a[10],
            te15_bottom: a[11],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BasParse {
    pub records: Vec<BasRecord>,
    pub errors: Vec<RowError>,
}

/// Parse a BAS log. Missing columns fail the whole file; bad rows are
/// collected in `errors` and skipped.
pub fn read_bas_csv<R: Read>(r: R) -> Result<BasParse> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let idx = column_index(rdr.headers()?, &BAS_HEADER)?;
    let mut out = BasParse::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&rec, &idx) {
            Ok(row) => {
                if let Some(prev) = out.records.last() {
                    if row.timestamp <= prev.timestamp {
                        out.errors.push(RowError {
                            line,
                            message: format!(
                                "timestamp {} not after {}",
                                format_timestamp(&row.timestamp),
                                format_timestamp(&prev.timestamp)
                            ),
                        });
                        continue;
                    }
                }
                out.records.push(row);
            }
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, idx: &[usize]) -> std::result::Result<BasRecord, String> {
    let field = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
    let timestamp = parse_timestamp(field(0)).map_err(|e| e.to_string())?;
    let num = |k: usize| -> std::result::Result<f64, String> {
        field(k)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{}: cannot parse `{}`", BAS_HEADER[k], field(k)))
    };
    let fan = match field(8) {
        "0" => false,
        "1" => true,
        other => return Err(format!("#S1: signal must be 0 or 1, got `{other}`")),
    };
    let valve = num(9)?;
    if !(0.0..=100.0).contains(&valve) {
        return Err(format!("#V1: valve position {valve} outside [0, 100]"));
    }
    let rh = num(7)?;
    if !(0.0..=100.0).contains(&rh) {
        return Err(format!("#H1: humidity {rh} outside [0, 100]"));
    }
    Ok(BasRecord {
        timestamp,
        t1_ea: num(1)?,
        t2_ra: num(2)?,
        t3_oa: num(3)?,
        t4_ma: num(4)?,
        t5_sa: num(5)?,
        t6_set: num(6)?,
        h1_ra: rh,
        s1_fan: fan,
        v1_valve: valve,
        t7_chws: num(10)?,
        t8_chwr: num(11)?,
        te3_top: num(12)?,
        te15_bottom: num(13)?,
    })
}

pub fn parse_bas_csv(path: impl AsRef<Path>) -> Result<BasParse> {
    read_bas_csv(std::fs::File::open(path)?)
}

pub fn write_bas_csv<W: Write>(w: W, rows: &[BasRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BAS_HEADER)?;
    for r in rows {
        let t = |v: f64| format!("{v:.2}");
        out.write_record([
            format_timestamp(&r.timestamp),
            t(r.t1_ea),
            t(r.t2_ra),
            t(r.t3_oa),
            t(r.t4_ma),
            t(r.t5_sa),
            t(r.t6_set),
            format!("{:.1}", r.h1_ra),
            if r.s1_fan { "1".into() } else { "0".into() },
            format!("{:.1}", r.v1_valve),
            t(r.t7_chws),
            t(r.t8_chwr),
            t(r.te3_top),
            t(r.te15_bottom),
        ])?;
    }
    out.flush()?;
    Ok(())
}
