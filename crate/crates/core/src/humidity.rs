//! Day-ahead indoor relative-humidity forecasting.
//!
//! Two boosted ensembles share physics-derived features: model A sees only
//! exogenous inputs, model B additionally sees the previous-step indoor RH.
//! Forecasts roll out recursively, feeding each blended prediction back as
//! the next lag, and are blended as `w·A + (1 − w)·B` clamped to [0, 100] %.
//! After a long AHU-off stretch the lag is re-initialized to outdoor RH.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::psychro::{self, MoistAirState};
use crate::regressor::{self, GbtHyperparams, GbtModel};

/// Design supply airflow while the AHU runs (m³/h).
pub const DESIGN_AIRFLOW_CMH: f64 = 32_820.0;
pub const MIN_HISTORY: usize = 200;
/// Consecutive AHU-off steps (6 h at 5 min) that trigger a lag reset.
pub const RESET_OFF_STEPS: usize = 72;
pub const EXOGENOUS_FEATURES: usize = 10;

/// Raw per-step inputs of the forecaster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumidityExogenous {
    pub t_oa: f64,
    pub rh_oa: f64,
    /// Indoor temperature (measured when training, predicted when forecasting).
    pub t_in: f64,
    pub t_set: f64,
    pub ahu_on: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumidityFeatures {
    pub t_oa: f64,
    pub rh_oa: f64,
    pub t_dp_oa: f64,
    pub ah_oa: f64,
    pub vp_ratio: f64,
    pub dt_io: f64,
    pub dt_set: f64,
    pub ah_times_airflow: f64,
    pub tset_times_rhoa: f64,
    pub ahu_on: f64,
    pub rh_lag: f64,
}

impl HumidityFeatures {
    pub fn exogenous(&self) -> [f64; EXOGENOUS_FEATURES] {
        [
            self.t_oa,
            self.rh_oa,
            self.t_dp_oa,
            self.ah_oa,
            self.vp_ratio,
            self.dt_io,
            self.dt_set,
            self.ah_times_airflow,
            self.tset_times_rhoa,
            self.ahu_on,
        ]
    }

    pub fn with_lag(&self) -> [f64; EXOGENOUS_FEATURES + 1] {
        let mut out = [0.0; EXOGENOUS_FEATURES + 1];
        out[..EXOGENOUS_FEATURES].copy_from_slice(&self.exogenous());
        out[EXOGENOUS_FEATURES] = self.rh_lag;
        out
    }
}

/// Feature vector for one step. `airflow_cmh` is the supply airflow actually
/// delivered (zero when the AHU is off).
pub fn build_features(x: &HumidityExogenous, airflow_cmh: f64, rh_lag: f64) -> Result<HumidityFeatures> {
    let outdoor = MoistAirState::new(x.t_oa, x.rh_oa)?;
    let e_oa = psychro::vapor_pressure(&outdoor);
    let es_in = psychro::saturation_vapor_pressure(x.t_in)?;
    let ah_oa = psychro::absolute_humidity(&outdoor);
    // a bone-dry outdoor state has no dew point; use the Magnus floor instead
    let t_dp_oa = if x.rh_oa > 0.0 {
        psychro::dew_point(&outdoor)?
    } else {
        -psychro::CONSTANTS.b_magnus
    };
    Ok(HumidityFeatures {
        t_oa: x.t_oa,
        rh_oa: x.rh_oa,
        t_dp_oa,
        ah_oa,
        vp_ratio: e_oa / es_in,
        dt_io: x.t_in - x.t_oa,
        dt_set: x.t_set - x.t_in,
        ah_times_airflow: ah_oa * airflow_cmh,
        tset_times_rhoa: x.t_set * x.rh_oa,
        ahu_on: if x.ahu_on { 1.0 } else { 0.0 },
        rh_lag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumidityEnsemble {
    pub model_a: GbtModel,
    pub model_b: GbtModel,
    pub weight_a: f64,
    pub airflow_cmh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumidityObservation {
    pub exo: HumidityExogenous,
    /// Measured indoor RH (%).
    pub rh_in: f64,
}

/// Lag to use at step `k` of a recursive rollout, or `None` to keep the
/// previous prediction.
fn reset_lag(k: usize, x: &HumidityExogenous, off_run: usize) -> Option<f64> {
    let overnight_start = k == 0 && !x.ahu_on;
    let restart = x.ahu_on && off_run >= RESET_OFF_STEPS;
    (overnight_start || restart).then_some(x.rh_oa)
}

/// Tracks consecutive AHU-off steps; a day starting with the AHU off is
/// treated as following an off night.
struct OffRun(usize);

impl OffRun {
    fn start(first: &HumidityExogenous) -> Self {
        OffRun(if first.ahu_on { 0 } else { RESET_OFF_STEPS })
    }

    fn advance(&mut self, x: &HumidityExogenous) {
        self.0 = if x.ahu_on { 0 } else { self.0 + 1 };
    }
}

fn airflow_for(x: &HumidityExogenous, design: f64) -> f64 {
    if x.ahu_on {
        design
    } else {
        0.0
    }
}

fn rollout(
    model_a: &GbtModel,
    model_b: &GbtModel,
    weight_a: f64,
    airflow_cmh: f64,
    day: &[HumidityExogenous],
    rh_init: f64,
) -> Result<Vec<f64>> {
    let Some(first) = day.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(day.len());
    let mut lag = rh_init;
    let mut off = OffRun::start(first);
    for (k, x) in day.iter().enumerate() {
        if k > 0 {
            off.advance(&day[k - 1]);
        }
        if let Some(reset) = reset_lag(k, x, off.0) {
            lag = reset;
        }
        let f = build_features(x, airflow_for(x, airflow_cmh), lag)?;
        let a = if weight_a > 0.0 {
            model_a.predict(&f.exogenous())?
        } else {
            0.0
        };
        let b = if weight_a < 1.0 {
            model_b.predict(&f.with_lag())?
        } else {
            0.0
        };
        let rh = (weight_a * a + (1.0 - weight_a) * b).clamp(0.0, 100.0);
        out.push(rh);
        lag = rh;
    }
    Ok(out)
}

impl HumidityEnsemble {
    /// Recursive forecast over one day. `rh_init` seeds the lag unless the
    /// day opens after an off period, in which case outdoor RH is used.
    pub fn forecast_day(&self, day: &[HumidityExogenous], rh_init: f64) -> Result<Vec<f64>> {
        if day.is_empty() {
            return Err(Error::invalid("forecast day is empty"));
        }
        rollout(
            &self.model_a,
            &self.model_b,
            self.weight_a,
            self.airflow_cmh,
            day,
            rh_init,
        )
    }

    /// Lag feature the rollout uses at step 0.
    pub fn initial_lag(day: &[HumidityExogenous], rh_init: f64) -> f64 {
        match day.first() {
            Some(x) => reset_lag(0, x, OffRun::start(x).0).unwrap_or(rh_init),
            None => rh_init,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HumidityTrainOptions {
    pub hyperparams: GbtHyperparams,
    /// Fraction of the history held out (tail) for the weight search.
    pub validation_split: f64,
    pub seed: u64,
    pub airflow_cmh: f64,
}

impl Default for HumidityTrainOptions {
    fn default() -> Self {
        Self {
            hyperparams: GbtHyperparams::humidity(),
            validation_split: 0.25,
            seed: 17,
            airflow_cmh: DESIGN_AIRFLOW_CMH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumidityTraining {
    pub ensemble: HumidityEnsemble,
    /// Rollout RMSE on the held-out tail for each weight 0.0, 0.1, …, 1.0.
    pub weight_rmse: Vec<f64>,
}

/// Teacher-forced training rows (measured lag, same reset rule as the
/// rollout).
type Rows = Vec<Vec<f64>>;

fn training_rows(history: &[HumidityObservation], airflow_cmh: f64) -> Result<(Rows, Rows, Vec<f64>)> {
    let mut xa = Vec::with_capacity(history.len());
    let mut xb = Vec::with_capacity(history.len());
    let mut y = Vec::with_capacity(history.len());
    let mut off = OffRun::start(&history[0].exo);
    for (k, obs) in history.iter().enumerate() {
        if k > 0 {
            off.advance(&history[k - 1].exo);
        }
        let lag = match reset_lag(k, &obs.exo, off.0) {
            Some(r) => r,
            None if k == 0 => obs.exo.rh_oa,
            None => history[k - 1].rh_in,
        };
        let f = build_features(&obs.exo, airflow_for(&obs.exo, airflow_cmh), lag)?;
        xa.push(f.exogenous().to_vec());
        xb.push(f.with_lag().to_vec());
        y.push(obs.rh_in);
    }
    Ok((xa, xb, y))
}

pub fn train(history: &[HumidityObservation], opts: &HumidityTrainOptions) -> Result<HumidityTraining> {
    if history.len() < MIN_HISTORY {
        return Err(Error::InsufficientData {
            model: "humidity",
            required: MIN_HISTORY,
            actual: history.len(),
        });
    }
    if !(opts.validation_split > 0.0 && opts.validation_split < 1.0) {
        return Err(Error::invalid("validation_split must lie in (0, 1)"));
    }
    if history.iter().any(|o| !(0.0..=100.0).contains(&o.rh_in)) {
        return Err(Error::invalid("indoor RH outside [0, 100] %"));
    }
    let n_tail = ((history.len() as f64) * opts.validation_split).round() as usize;
    let n_head = history.len() - n_tail.clamp(1, history.len() - 2);
    let (head, tail) = history.split_at(n_head);

    let (xa, xb, y) = training_rows(head, opts.airflow_cmh)?;
    let model_a = regressor::fit(&xa, &y, opts.hyperparams, opts.seed)?;
    let model_b = regressor::fit(&xb, &y, opts.hyperparams, opts.seed.wrapping_add(1))?;

    // roll the tail out in day-length chunks seeded with the measured RH
    let chunks: Vec<(usize, usize)> = (0..tail.len())
        .step_by(crate::STEPS_PER_DAY)
        .map(|s| (s, (s + crate::STEPS_PER_DAY).min(tail.len())))
        .collect();
    let exo: Vec<HumidityExogenous> = tail.iter().map(|o| o.exo).collect();
    let mut weight_rmse = Vec::with_capacity(11);
    for i in 0..=10 {
        let w = i as f64 / 10.0;
        let mut se = 0.0;
        for &(s, e) in &chunks {
            let seed_rh = if s == 0 {
                head[head.len() - 1].rh_in
            } else {
                tail[s - 1].rh_in
            };
            let pred = rollout(&model_a, &model_b, w, opts.airflow_cmh, &exo[s..e], seed_rh)?;
            se += pred
                .iter()
                .zip(&tail[s..e])
                .map(|(p, o)| (p - o.rh_in).powi(2))
                .sum::<f64>();
        }
        weight_rmse.push((se / tail.len() as f64).sqrt());
    }
    // highest weight wins within a relative 1e-12 tie
    let mut best = 10;
    for i in (0..10).rev() {
        if weight_rmse[i] < weight_rmse[best] - 1e-12 * weight_rmse[best].abs() {
            best = i;
        }
    }
    Ok(HumidityTraining {
        ensemble: HumidityEnsemble {
            model_a,
            model_b,
            weight_a: best as f64 / 10.0,
            airflow_cmh: opts.airflow_cmh,
        },
        weight_rmse,
    })
}

const MAGIC: &str = "humidity-ensemble v1";

impl HumidityEnsemble {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "weight_a {}", self.weight_a);
        let _ = writeln!(s, "airflow_cmh {}", self.airflow_cmh);
        let _ = writeln!(s, "lag_depth 1");
        s.push_str("model_a\n");
        s.push_str(&self.model_a.to_text());
        s.push_str("model_b\n");
        s.push_str(&self.model_b.to_text());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::ModelStore(format!("humidity store: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(bad("missing header"));
        }
        let mut value = |key: &str| -> Result<f64> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            match line.trim().split_once(' ') {
                Some((k, v)) if k == key => v.trim().parse().map_err(|_| bad(&format!("bad `{key}`"))),
                _ => Err(bad(&format!("expected `{key}`"))),
            }
        };
        let weight_a = value("weight_a")?;
        let airflow_cmh = value("airflow_cmh")?;
        if value("lag_depth")? != 1.0 {
            return Err(bad("only lag depth 1 is supported"));
        }
        if !(0.0..=1.0).contains(&weight_a) {
            return Err(bad("weight_a outside [0, 1]"));
        }
        let body: Vec<&str> = text.lines().skip(4).collect();
        let split = body
            .iter()
            .position(|l| l.trim() == "model_b")
            .ok_or_else(|| bad("missing model_b"))?;
        if body.first().map(|l| l.trim()) != Some("model_a") {
            return Err(bad("missing model_a"));
        }
        let model_a = GbtModel::from_text(&body[1..split].join("\n"))?;
        let model_b = GbtModel::from_text(&body[split + 1..].join("\n"))?;
        if model_a.feature_count() != EXOGENOUS_FEATURES || model_b.feature_count() != EXOGENOUS_FEATURES + 1 {
            return Err(bad("feature counts do not match the humidity feature set"));
        }
        Ok(Self {
            model_a,
            model_b,
            weight_a,
            airflow_cmh,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingModel(path.display().to_string()))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exo(k: usize) -> HumidityExogenous {
        let h = (k % crate::STEPS_PER_DAY) as f64 / 12.0;
        let on = (8.0..18.0).contains(&h);
        HumidityExogenous {
            t_oa: 27.0 + 4.0 * ((h - 9.0) / 24.0 * std::f64::consts::TAU).sin(),
            rh_oa: 70.0 - 15.0 * ((h - 9.0) / 24.0 * std::f64::consts::TAU).sin(),
            t_in: if on { 24.5 } else { 26.5 },
            t_set: 24.0,
            ahu_on: on,
        }
    }

    fn small_hp() -> GbtHyperparams {
        GbtHyperparams::new(60, 4, 0.2).unwrap()
    }

    #[test]
    fn feature_consistency() {
        let x = HumidityExogenous {
            t_oa: 30.0,
            rh_oa: 70.0,
            t_in: 25.0,
            t_set: 24.0,
            ahu_on: true,
        };
        let f = build_features(&x, DESIGN_AIRFLOW_CMH, 55.0).unwrap();
        let out = MoistAirState::new(30.0, 70.0).unwrap();
        assert_eq!(f.ah_oa, psychro::absolute_humidity(&out));
        assert_eq!(f.t_dp_oa, psychro::dew_point(&out).unwrap());
        assert_relative_eq!(
            f.vp_ratio,
            psychro::vapor_pressure(&out) / psychro::saturation_vapor_pressure(25.0).unwrap()
        );
        assert_eq!(f.ah_times_airflow, f.ah_oa * DESIGN_AIRFLOW_CMH);
        assert_eq!(f.dt_io, -5.0);
        assert_eq!(f.dt_set, -1.0);
        assert_eq!(f.tset_times_rhoa, 24.0 * 70.0);
        assert_eq!(f.rh_lag, 55.0);

        let same = HumidityExogenous { t_in: 30.0, ..x };
        assert_eq!(build_features(&same, 0.0, 0.0).unwrap().dt_io, 0.0);
        assert_eq!(build_features(&same, 0.0, 0.0).unwrap().ah_times_airflow, 0.0);
        assert!(build_features(&HumidityExogenous { rh_oa: 120.0, ..x }, 0.0, 0.0).is_err());
    }

    #[test]
    fn too_little_history() {
        let h: Vec<HumidityObservation> = (0..50)
            .map(|k| HumidityObservation {
                exo: exo(k),
                rh_in: 50.0,
            })
            .collect();
        assert!(matches!(
            train(&h, &HumidityTrainOptions::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn constant_history_gives_flat_forecast_and_top_weight() {
        let h: Vec<HumidityObservation> = (0..600)
            .map(|k| HumidityObservation {
                exo: exo(k),
                rh_in: 52.0,
            })
            .collect();
        let opts = HumidityTrainOptions {
            hyperparams: small_hp(),
            ..Default::default()
        };
        let t = train(&h, &opts).unwrap();
        assert_eq!(t.ensemble.weight_a, 1.0);
        let day: Vec<HumidityExogenous> = (0..288).map(|_| exo(100)).collect();
        let f = t.ensemble.forecast_day(&day, 40.0).unwrap();
        assert!(f.iter().all(|v| (*v - 52.0).abs() < 1e-9));
    }

    #[test]
    fn exogenous_process_prefers_model_a() {
        // RH is a fixed function of outdoor RH, which carries a day-to-day
        // offset the lag channel can only chase
        let offset = |d: usize| ((d * 37 % 11) as f64 - 5.0) * 2.0;
        let h: Vec<HumidityObservation> = (0..2016)
            .map(|k| {
                let mut x = exo(k);
                x.rh_oa += offset(k / 288);
                let rh = 30.0 + 0.4 * x.rh_oa + if x.ahu_on { -6.0 } else { 4.0 };
                HumidityObservation { exo: x, rh_in: rh }
            })
            .collect();
        let opts = HumidityTrainOptions {
            hyperparams: small_hp(),
            ..Default::default()
        };
        let t = train(&h, &opts).unwrap();
        assert!(t.ensemble.weight_a >= 0.5, "weights {:?}", t.weight_rmse);
        assert!(t.weight_rmse[10] <= t.weight_rmse[0]);
    }

    #[test]
    fn rollout_properties() {
        let h: Vec<HumidityObservation> = (0..1000)
            .map(|k| {
                let x = exo(k);
                HumidityObservation {
                    exo: x,
                    rh_in: 35.0 + 0.4 * x.rh_oa + (k % 5) as f64,
                }
            })
            .collect();
        let opts = HumidityTrainOptions {
            hyperparams: small_hp(),
            ..Default::default()
        };
        let mut ens = train(&h, &opts).unwrap().ensemble;
        let day: Vec<HumidityExogenous> = (288..576).map(exo).collect();

        ens.weight_a = 1.0;
        let a = ens.forecast_day(&day, 10.0).unwrap();
        let b = ens.forecast_day(&day, 90.0).unwrap();
        assert_eq!(a[1..], b[1..]);

        ens.weight_a = 0.0;
        let f = ens.forecast_day(&day, 10.0).unwrap();
        assert!(f.iter().all(|v| (0.0..=100.0).contains(v)));
        // AHU off at midnight: the opening lag is the outdoor RH, not rh_init
        assert_eq!(HumidityEnsemble::initial_lag(&day, 10.0), day[0].rh_oa);
        assert_eq!(f, ens.forecast_day(&day, 90.0).unwrap());
        assert!(ens.forecast_day(&[], 50.0).is_err());
    }

    #[test]
    fn store_round_trip() {
        let h: Vec<HumidityObservation> = (0..400)
            .map(|k| HumidityObservation {
                exo: exo(k),
                rh_in: 40.0 + (k % 9) as f64,
            })
            .collect();
        let opts = HumidityTrainOptions {
            hyperparams: GbtHyperparams::new(10, 3, 0.1).unwrap(),
            ..Default::default()
        };
        let e = train(&h, &opts).unwrap().ensemble;
        let back = HumidityEnsemble::from_text(&e.to_text()).unwrap();
        assert_eq!(back, e);
        assert!(HumidityEnsemble::from_text("humidity-ensemble v1\nweight_a 2\n").is_err());
    }
}
