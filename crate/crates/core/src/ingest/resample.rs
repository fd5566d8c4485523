//! One-minute to five-minute resampling.
//!
//! Analog channels use a trimmed mean that drops `ceil(0.1·n)` samples from
//! each end of the sorted bin (with five samples: the minimum and maximum,
//! leaving the middle three). Bins of fewer than three samples are averaged
//! untrimmed. The fan signal is on when a strict majority of the bin's
//! minutes are on (three or more of five).

use chrono::{NaiveDateTime, Timelike};

use super::bas::BasRecord;

pub const BIN_MINUTES: i64 = 5;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Resampled {
    pub records: Vec<BasRecord>,
    /// Start of every bin that held fewer than five samples.
    pub partial_bins: Vec<NaiveDateTime>,
}

pub fn trimmed_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = if n >= 3 { (0.1 * n as f64).ceil() as usize } else { 0 };
    let kept = &v[k..n - k];
    if kept[0] == kept[kept.len() - 1] {
        return kept[0];
    }
    kept.iter().sum::<f64>() / kept.len() as f64
}

pub fn majority(signals: &[bool]) -> bool {
    2 * signals.iter().filter(|s| **s).count() > signals.len()
}

fn bin_start(t: &NaiveDateTime) -> NaiveDateTime {
    let minute = t.minute() as i64;
    let floored = t.with_second(0).and_then(|t| t.with_nanosecond(0)).unwrap_or(*t);
    floored - chrono::Duration::minutes(minute % BIN_MINUTES)
}

/// Resample a strictly increasing one-minute log.
pub fn resample_5min(minute_data: &[BasRecord]) -> Resampled {
    let mut out = Resampled::default();
    let mut i = 0;
    while i < minute_data.len() {
        let start = bin_start(&minute_data[i].timestamp);
        let mut j = i;
        while j < minute_data.len() && bin_start(&minute_data[j].timestamp) == start {
            j += 1;
        }
        let bin = &minute_data[i..j];
        if bin.len() < BIN_MINUTES as usize {
            log::warn!("partial 5-minute bin at {start} ({} samples)", bin.len());
            out.partial_bins.push(start);
        }
        let mut analog = [0.0; 12];
        for (c, slot) in analog.iter_mut().enumerate() {
            let vals: Vec<f64> = bin.iter().map(|r| r.analog()[c]).collect();
            *slot = trimmed_mean(&vals);
        }
        let fans: Vec<bool> = bin.iter().map(|r| r.s1_fan).collect();
        out.records.push(BasRecord::from_analog(start, analog, majority(&fans)));
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;

    #[test]
    fn trim_rule() {
        assert_eq!(trimmed_mean(&[1.0, 2.0, 3.0, 4.0, 100.0]), 3.0);
        assert_eq!(trimmed_mean(&[100.0, 4.0, 1.0, 3.0, 2.0]), 3.0);
        assert_eq!(trimmed_mean(&[2.0, 4.0]), 3.0);
        assert_eq!(trimmed_mean(&[7.25; 5]), 7.25);
    }

    #[test]
    fn majority_rule() {
        assert!(majority(&[true, true, true, false, false]));
        assert!(!majority(&[true, true, false, false, false]));
    }

    fn minute(m: i64, t: f64, fan: bool) -> BasRecord {
        let ts = parse_timestamp("2024-07-01 08:00").unwrap() + chrono::Duration::minutes(m);
        BasRecord::from_analog(ts, [t; 12], fan)
    }

    #[test]
    fn bins_and_partial_flags() {
        let temps = [1.0, 2.0, 3.0, 4.0, 100.0, 5.0, 5.0, 5.0];
        let fans = [true, true, true, false, false, false, true, false];
        let rows: Vec<BasRecord> = (0..8).map(|m| minute(m, temps[m as usize], fans[m as usize])).collect();
        let r = resample_5min(&rows);
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.records[0].t2_ra, 3.0);
        assert!(r.records[0].s1_fan);
        assert!(!r.records[1].s1_fan);
        assert_eq!(r.partial_bins, vec![rows[5].timestamp]);
    }

    #[test]
    fn idempotent_on_held_values() {
        let rows: Vec<BasRecord> = (0..60)
            .map(|m| minute(m, 20.0 + (m / 5) as f64 * 0.25, (m / 5) % 2 == 0))
            .collect();
        let once = resample_5min(&rows).records;
        assert_eq!(once.len(), 12);
        for (k, r) in once.iter().enumerate() {
            assert_eq!(r.t5_sa, 20.0 + k as f64 * 0.25);
            assert_eq!(r.s1_fan, k % 2 == 0);
        }
        assert_eq!(resample_5min(&once).records, once);
    }
}
