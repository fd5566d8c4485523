//! Storage-tank log and its daily aggregates.
//!
//! The 5-minute tank log samples the tank state at each timestamp; the load
//! column is the discharge over the following step. Daily rows pair the mean
//! temperature and outlet temperature observed right after the peak-load
//! step and right after the last operating step.

use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};

use super::{column_index, format_timestamp, parse_timestamp};
use crate::error::{Error, Result};
use crate::tes::{self, TesDayObservation};

pub const TES_LOG_HEADER: [&str; 7] = [
    "timestamp",
    "q_load_kw",
    "t_avg_degc",
    "t_out_degc",
    "t_top_degc",
    "t_bottom_degc",
    "operating",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TesLogRecord {
    pub timestamp: NaiveDateTime,
    pub q_load: f64,
    pub t_avg: f64,
    pub t_out: f64,
    pub t_top: f64,
    pub t_bottom: f64,
    pub operating: bool,
}

pub fn write_tes_log_csv<W: Write>(w: W, rows: &[TesLogRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TES_LOG_HEADER)?;
    for r in rows {
        out.write_record([
            format_timestamp(&r.timestamp),
            format!("{:.3}", r.q_load),
            format!("{:.4}", r.t_avg),
            format!("{:.2}", r.t_out),
            format!("{:.2}", r.t_top),
            format!("{:.2}", r.t_bottom),
            if r.operating { "1".into() } else { "0".into() },
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tes_log_csv<R: Read>(r: R) -> Result<Vec<TesLogRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let idx = column_index(rdr.headers()?, &TES_LOG_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            f(k).parse::<f64>()
                .map_err(|_| Error::Parse(format!("tank log line {}: bad {} `{}`", i + 2, TES_LOG_HEADER[k], f(k))))
        };
        rows.push(TesLogRecord {
            timestamp: parse_timestamp(f(0))?,
            q_load: num(1)?,
            t_avg: num(2)?,
            t_out: num(3)?,
            t_top: num(4)?,
            t_bottom: num(5)?,
            operating: f(6) == "1",
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TesDailyRow {
    pub date: NaiveDate,
    /// kWh
    pub q_cum: f64,
    /// kW
    pub peak_load: f64,
    /// h
    pub elapsed: f64,
    pub t_init: f64,
    pub t_avg_peak: f64,
    pub t_out_peak: f64,
    pub t_avg_end: f64,
    pub t_out_end: f64,
    pub t_top_end: f64,
    pub t_bottom_end: f64,
    pub collapsed: bool,
    /// Fewer samples than a full day, or no sample after the last operating step.
    pub incomplete: bool,
}

impl TesDailyRow {
    /// Observation for curve fitting; `None` for days without operation.
    pub fn observation(&self) -> Option<TesDayObservation> {
        (self.elapsed > 0.0 && !self.incomplete).then_some(TesDayObservation {
            t_init: self.t_init,
            t_avg_peak: self.t_avg_peak,
            t_out_peak: self.t_out_peak,
            t_avg_end: self.t_avg_end,
            q_cum: self.q_cum,
            elapsed: self.elapsed,
            t_out_end: self.t_out_end,
        })
    }
}

/// One row per calendar day of a contiguous log sampled every `dt` seconds.
pub fn daily_aggregate(log: &[TesLogRecord], dt: f64, steps_per_day: usize) -> Vec<TesDailyRow> {
    let mut rows = Vec::new();
    let mut i = 0;
    while i < log.len() {
        let date = log[i].timestamp.date();
        let mut j = i;
        while j < log.len() && log[j].timestamp.date() == date {
            j += 1;
        }
        rows.push(aggregate_day(date, &log[i..j], dt, steps_per_day));
        i = j;
    }
    rows
}

fn aggregate_day(date: NaiveDate, day: &[TesLogRecord], dt: f64, steps_per_day: usize) -> TesDailyRow {
    let q_cum = day.iter().map(|r| r.q_load * dt / 3600.0).sum::<f64>();
    let ops: Vec<usize> = (0..day.len()).filter(|&k| day[k].operating).collect();
    let mut incomplete = day.len() < steps_per_day;
    let last_sample = day.last().copied().unwrap_or(day[0]);
    let (first, last) = match (ops.first(), ops.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return TesDailyRow {
                date,
                q_cum,
                peak_load: 0.0,
                elapsed: 0.0,
                t_init: day[0].t_avg,
                t_avg_peak: day[0].t_avg,
                t_out_peak: day[0].t_out,
                t_avg_end: last_sample.t_avg,
                t_out_end: last_sample.t_out,
                t_top_end: last_sample.t_top,
                t_bottom_end: last_sample.t_bottom,
                collapsed: tes::stratification_collapsed(last_sample.t_top, last_sample.t_bottom),
                incomplete,
            };
        }
    };
    let mut peak = first;
    for &k in &ops {
        if day[k].q_load > day[peak].q_load {
            peak = k;
        }
    }
    if last + 1 >= day.len() {
        incomplete = true;
    }
    let after = |k: usize| day[(k + 1).min(day.len() - 1)];
    let end = after(last);
    TesDailyRow {
        date,
        q_cum,
        peak_load: day[peak].q_load,
        elapsed: ops.len() as f64 * dt / 3600.0,
        t_init: day[first].t_avg,
        t_avg_peak: after(peak).t_avg,
        t_out_peak: after(peak).t_out,
        t_avg_end: end.t_avg,
        t_out_end: end.t_out,
        t_top_end: end.t_top,
        t_bottom_end: end.t_bottom,
        collapsed: tes::stratification_collapsed(end.t_top, end.t_bottom),
        incomplete,
    }
}

pub const TES_DAILY_HEADER: [&str; 13] = [
    "date",
    "q_cum_kwh",
    "peak_load_kw",
    "elapsed_h",
    "t_init_degc",
    "t_avg_peak_degc",
    "t_out_peak_degc",
    "t_avg_end_degc",
    "t_out_end_degc",
    "t_top_end_degc",
    "t_bottom_end_degc",
    "collapsed",
    "incomplete",
];

pub fn write_tes_daily_csv<W: Write>(w: W, rows: &[TesDailyRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TES_DAILY_HEADER)?;
    for r in rows {
        out.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            format!("{:.3}", r.q_cum),
            format!("{:.3}", r.peak_load),
            format!("{:.4}", r.elapsed),
            format!("{:.4}", r.t_init),
            format!("{:.4}", r.t_avg_peak),
            format!("{:.2}", r.t_out_peak),
            format!("{:.4}", r.t_avg_end),
            format!("{:.2}", r.t_out_end),
            format!("{:.2}", r.t_top_end),
            format!("{:.2}", r.t_bottom_end),
            (r.collapsed as u8).to_string(),
            (r.incomplete as u8).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tes_daily_csv<R: Read>(r: R) -> Result<Vec<TesDailyRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let idx = column_index(rdr.headers()?, &TES_DAILY_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |k: usize| rec.get(idx[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            f(k).parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "tank daily line {}: bad {} `{}`",
                    i + 2,
                    TES_DAILY_HEADER[k],
                    f(k)
                ))
            })
        };
        rows.push(TesDailyRow {
            date: NaiveDate::parse_from_str(f(0), "%Y-%m-%d")
                .map_err(|e| Error::Parse(format!("tank daily line {}: {e}", i + 2)))?,
            q_cum: num(1)?,
            peak_load: num(2)?,
            elapsed: num(3)?,
            t_init: num(4)?,
            t_avg_peak: num(5)?,
            t_out_peak: num(6)?,
            t_avg_end: num(7)?,
            t_out_end: num(8)?,
            t_top_end: num(9)?,
            t_bottom_end: num(10)?,
            collapsed: f(11) == "1",
            incomplete: f(12) == "1",
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_day(date: &str, loads: &[(usize, f64)], steps: usize) -> Vec<TesLogRecord> {
        let start = parse_timestamp(&format!("{date} 00:00")).unwrap();
        let mut t_avg = 7.0;
        (0..steps)
            .map(|k| {
                let q = loads.iter().find(|(s, _)| *s == k).map_or(0.0, |(_, q)| *q);
                let r = TesLogRecord {
                    timestamp: start + chrono::Duration::minutes(5 * k as i64),
                    q_load: q,
                    t_avg,
                    t_out: t_avg - 0.5,
                    t_top: t_avg + 3.0,
                    t_bottom: t_avg - 1.0,
                    operating: (96..216).contains(&k),
                };
                t_avg += q * 300.0 / 1e6;
                r
            })
            .collect()
    }

    #[test]
    fn zero_load_day() {
        let rows = daily_aggregate(&log_day("2024-07-01", &[], 288), 300.0, 288);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].q_cum, 0.0);
        assert_eq!(rows[0].elapsed, 10.0);
        assert!(!rows[0].incomplete);
    }

    #[test]
    fn two_day_known_sums() {
        let mut log = log_day("2024-07-01", &[(100, 120.0), (150, 300.0), (151, 300.0)], 288);
        log.extend(log_day("2024-07-02", &[(96, 60.0), (215, 12.0)], 288));
        let rows = daily_aggregate(&log, 300.0, 288);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].q_cum, (120.0 + 600.0) * 300.0 / 3600.0);
        assert_eq!(rows[1].q_cum, 72.0 * 300.0 / 3600.0);
        assert_eq!(rows[0].peak_load, 300.0);
        // sample right after the first of the tied peak steps
        assert_eq!(rows[0].t_avg_peak, log[151].t_avg);
        assert_eq!(rows[1].t_avg_end, log[288 + 216].t_avg);
        assert_eq!(rows[0].t_init, 7.0);
    }

    #[test]
    fn short_day_is_incomplete() {
        let rows = daily_aggregate(&log_day("2024-07-01", &[], 200), 300.0, 288);
        assert!(rows[0].incomplete);
    }

    #[test]
    fn csv_round_trip() {
        let rows = daily_aggregate(&log_day("2024-07-01", &[(100, 120.0)], 288), 300.0, 288);
        let mut buf = Vec::new();
        write_tes_daily_csv(&mut buf, &rows).unwrap();
        let back = read_tes_daily_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back[0].q_cum - rows[0].q_cum).abs() < 1e-3);
        assert_eq!(back[0].collapsed, rows[0].collapsed);
    }
}
