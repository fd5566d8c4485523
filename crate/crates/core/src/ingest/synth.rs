//! Synthetic building season.
//!
//! Stands in for a measured dataset. One reference-floor zone follows a known
//! 4R2C network, a reference coil with a known UA and a known effectiveness
//! residual serves it from a 20-layer plug-flow storage tank, and the whole
//! building draws `scaling_factor` times the reference coil load from the
//! tank. Every ground-truth parameter is written to a sidecar so that
//! calibration results can be checked against it.
//!
//! The zone is served closed-loop: when the tank outlet is too warm for the
//! coil to cover the load, the coil delivers its capacity and the room
//! drifts above the network's own prediction. Those steps are marked
//! `saturated` in the truth file and show a fully open valve.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bas::{write_bas_csv, BasRecord};
use super::daily::{daily_aggregate, write_tes_daily_csv, write_tes_log_csv, TesDailyRow, TesLogRecord};
use super::schedule::{write_schedule_csv, ScheduleRecord};
use super::weather::{write_weather_csv, WeatherRecord};
use super::{format_timestamp, round_to};
use crate::coil::RATED_AIRFLOW_KG_S;
use crate::error::{Error, Result};
use crate::psychro::{self, MoistAirState};
use crate::rcload::{self, RcInputs, RcParams, RcState};
use crate::tes::TesConfig;
use crate::{STEPS_PER_DAY, TIMESTEP_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherParams {
    pub t_mean_degc: f64,
    pub t_amplitude_k: f64,
    /// Hour of the daily temperature maximum.
    pub t_peak_hour: f64,
    /// Day-to-day mean temperature process: AR(1) coefficient and innovation sd.
    pub daily_ar: f64,
    pub daily_sd_k: f64,
    /// Within-day AR(1) noise at the timestep.
    pub step_ar: f64,
    pub step_sd_k: f64,
    pub rh_mean_pct: f64,
    /// RH drop per kelvin above the daily mean.
    pub rh_slope_pct_per_k: f64,
    pub rh_daily_sd_pct: f64,
    pub solar_peak_w: f64,
    /// Lowest daily clearness factor.
    pub clearness_min: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            t_mean_degc: 26.5,
            t_amplitude_k: 4.5,
            t_peak_hour: 15.0,
            daily_ar: 0.7,
            daily_sd_k: 1.6,
            step_ar: 0.98,
            step_sd_k: 0.08,
            rh_mean_pct: 70.0,
            rh_slope_pct_per_k: 2.5,
            rh_daily_sd_pct: 6.0,
            solar_peak_w: 30_000.0,
            clearness_min: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub ahu_start_hour: u32,
    pub ahu_end_hour: u32,
    /// Each day's end hour is drawn uniformly from `ahu_end_hour ± end_jitter_h`.
    pub end_jitter_h: u32,
    pub t_set_degc: f64,
    /// Setpoint offset at AHU start, ramped linearly to zero over `start_ramp_h`.
    pub start_offset_k: f64,
    pub start_ramp_h: f64,
    /// Internal sensible gains while occupied and unoccupied (W).
    pub q_int_occupied_w: f64,
    pub q_int_unoccupied_w: f64,
    /// Gain multiplier over the 12:00 hour.
    pub lunch_factor: f64,
    /// Gain multiplier over the last operating hour.
    pub leaving_factor: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            ahu_start_hour: 8,
            ahu_end_hour: 18,
            end_jitter_h: 1,
            t_set_degc: 24.0,
            start_offset_k: 2.5,
            start_ramp_h: 1.5,
            q_int_occupied_w: 40_000.0,
            q_int_unoccupied_w: 6_000.0,
            lunch_factor: 0.7,
            leaving_factor: 0.4,
        }
    }
}

/// Zone moisture balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoistureParams {
    pub infiltration_tau_h: f64,
    pub ahu_tau_h: f64,
    /// Humidity-ratio gain from occupants (kg/kg per hour).
    pub latent_gain_per_h: f64,
    /// Coil apparatus dew point above the chilled-water inlet (K).
    pub coil_approach_k: f64,
}

impl Default for MoistureParams {
    fn default() -> Self {
        Self {
            infiltration_tau_h: 3.0,
            ahu_tau_h: 0.5,
            latent_gain_per_h: 0.0008,
            coil_approach_k: 4.0,
        }
    }
}

/// Reference coil: `ε = 1 − exp(−UA/C_air) + rh_coef·(RH − rh_ref)/20 +
/// t_w_coef·(t_w − t_w_ref)/4`, clamped to `[0.01, 0.99]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilTruth {
    pub ua_kw_per_k: f64,
    pub rh_coef: f64,
    pub rh_ref_pct: f64,
    pub t_w_coef: f64,
    pub t_w_ref_degc: f64,
}

impl Default for CoilTruth {
    fn default() -> Self {
        Self {
            ua_kw_per_k: 9.0,
            rh_coef: 0.02,
            rh_ref_pct: 55.0,
            t_w_coef: -0.015,
            t_w_ref_degc: 9.0,
        }
    }
}

impl CoilTruth {
    pub fn effectiveness(&self, c_air: f64, rh: f64, t_w: f64) -> f64 {
        let eps = 1.0 - (-self.ua_kw_per_k / c_air).exp()
            + self.rh_coef * (rh - self.rh_ref_pct) / 20.0
            + self.t_w_coef * (t_w - self.t_w_ref_degc) / 4.0;
        eps.clamp(0.01, 0.99)
    }

    /// Total capacity (kW) at rated airflow.
    pub fn capacity(&self, t_ra: f64, rh_ra: f64, t_w: f64) -> Result<f64> {
        let w = psychro::humidity_ratio(&MoistAirState::new(t_ra, rh_ra)?)?;
        let c_air = RATED_AIRFLOW_KG_S * psychro::moist_air_cp(w);
        let dh = psychro::enthalpy_from_ratio(t_ra, w) - psychro::saturated_surface_enthalpy(t_w)?;
        Ok((self.effectiveness(c_air, rh_ra, t_w) * RATED_AIRFLOW_KG_S * dh).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub days: usize,
    pub seed: u64,
    /// First day, `YYYY-MM-DD`.
    pub start_date: String,
    pub envelope: RcParams,
    pub initial_state: RcState,
    pub tank: TesConfig,
    pub weather: WeatherParams,
    pub schedule: ScheduleParams,
    pub moisture: MoistureParams,
    pub coil: CoilTruth,
    pub scaling_factor: f64,
    pub shr: f64,
    pub t_return_design_degc: f64,
    /// Smallest water-side temperature rise across the coil (K).
    pub dt_water_min_k: f64,
    /// Nightly charging temperatures are drawn uniformly from this range.
    pub charge_range_degc: [f64; 2],
    pub layers: usize,
    /// 0-based layers (from the top) reported as the upper and lower tank sensors.
    pub top_sensor_layer: usize,
    pub bottom_sensor_layer: usize,
    /// Standard deviation of additive noise on the 1-minute BAS temperatures.
    pub bas_noise_k: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 62,
            seed: 2024,
            start_date: "2024-07-01".into(),
            envelope: RcParams {
                r_env1: 2.5e-4,
                r_env2: 1.0e-4,
                r_env3: 2.0e-4,
                c_mass: 3.0e8,
                c_air: 5.0e7,
                r_ahu_coeffs: [2_000.0, 5_000.0, 500.0, 30_000.0],
            },
            initial_state: RcState {
                t_room: 26.0,
                t_mass: 27.0,
            },
            tank: TesConfig::default(),
            weather: WeatherParams::default(),
            schedule: ScheduleParams::default(),
            moisture: MoistureParams::default(),
            coil: CoilTruth::default(),
            scaling_factor: 1.8,
            shr: 0.8,
            t_return_design_degc: 16.0,
            dt_water_min_k: 1.0,
            charge_range_degc: [6.5, 7.5],
            layers: 20,
            top_sensor_layer: 2,
            bottom_sensor_layer: 14,
            bas_noise_k: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::invalid("synthetic season needs at least one day"));
        }
        self.start()?;
        self.envelope.validate()?;
        self.tank.validate()?;
        if !(self.scaling_factor >= 1.0) {
            return Err(Error::invalid("scaling_factor must be >= 1"));
        }
        if !(self.shr > 0.0 && self.shr <= 1.0) {
            return Err(Error::invalid("shr must lie in (0, 1]"));
        }
        if self.layers < 2 || self.top_sensor_layer >= self.layers || self.bottom_sensor_layer >= self.layers {
            return Err(Error::invalid("tank layers and sensor positions are inconsistent"));
        }
        let [lo, hi] = self.charge_range_degc;
        if !(self.tank.t_min <= lo && lo <= hi && hi <= self.tank.t_max) {
            return Err(Error::invalid("charge range must lie inside the tank box"));
        }
        let s = &self.schedule;
        if !(s.end_jitter_h < s.ahu_end_hour
            && s.ahu_start_hour < s.ahu_end_hour - s.end_jitter_h
            && s.ahu_end_hour + s.end_jitter_h <= 24)
        {
            return Err(Error::invalid("AHU hours must satisfy start < end ± jitter <= 24"));
        }
        if !(self.dt_water_min_k > 0.0 && self.bas_noise_k >= 0.0) {
            return Err(Error::invalid("dt_water_min_k must be > 0 and bas_noise_k >= 0"));
        }
        Ok(())
    }

    pub fn start(&self) -> Result<NaiveDateTime> {
        NaiveDate::parse_from_str(&self.start_date, "%Y-%m-%d")
            .map(|d| d.and_hms_opt(0, 0, 0).unwrap_or_default())
            .map_err(|e| Error::Config(format!("start_date `{}`: {e}", self.start_date)))
    }
}

/// Ground-truth trajectory at the simulation timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub timestamp: NaiveDateTime,
    pub t_room: f64,
    pub t_mass: f64,
    pub rh_in: f64,
    /// Network-required and delivered sensible zone load (W).
    pub q_required: f64,
    pub q_delivered: f64,
    /// Total reference-coil load (kW).
    pub q_coil: f64,
    /// Whole-building discharge from the tank (kW).
    pub q_tank: f64,
    pub t_w_in: f64,
    pub saturated: bool,
    pub t_charge: f64,
}

pub const TRUTH_HEADER: [&str; 11] = [
    "timestamp",
    "t_room_degc",
    "t_mass_degc",
    "rh_in_pct",
    "q_required_w",
    "q_delivered_w",
    "q_coil_kw",
    "q_tank_kw",
    "t_w_in_degc",
    "saturated",
    "t_charge_degc",
];

pub fn write_truth_csv<W: Write>(w: W, rows: &[TruthRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRUTH_HEADER)?;
    for r in rows {
        out.write_record([
            format_timestamp(&r.timestamp),
            format!("{:.6}", r.t_room),
            format!("{:.6}", r.t_mass),
            format!("{:.4}", r.rh_in),
            format!("{:.3}", r.q_required),
            format!("{:.3}", r.q_delivered),
            format!("{:.4}", r.q_coil),
            format!("{:.4}", r.q_tank),
            format!("{:.4}", r.t_w_in),
            (r.saturated as u8).to_string(),
            format!("{:.4}", r.t_charge),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub weather: Vec<WeatherRecord>,
    pub schedule: Vec<ScheduleRecord>,
    pub bas_minute: Vec<BasRecord>,
    pub tes_log: Vec<TesLogRecord>,
    pub tes_daily: Vec<TesDailyRow>,
    pub truth: Vec<TruthRecord>,
}

/// Layered tank: layer 0 at the top. Warm return water enters the top and
/// cold water leaves the bottom, every layer shifting down by plug flow.
#[derive(Debug, Clone)]
struct LayeredTank {
    t: Vec<f64>,
    layer_mass: f64,
}

impl LayeredTank {
    fn new(cfg: &TesConfig, layers: usize, t0: f64) -> Self {
        Self {
            t: vec![t0; layers],
            layer_mass: cfg.mass_kg / layers as f64,
        }
    }

    fn outlet(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    fn mean(&self) -> f64 {
        self.t.iter().sum::<f64>() / self.t.len() as f64
    }

    /// Discharge `q_kw` for `dt` seconds. The return temperature is the
    /// design value or the outlet plus the minimum rise, whichever is
    /// warmer; the water flow follows from the energy balance. Upwind
    /// sub-steps keep the Courant number at or below one half. Returns the
    /// mean return temperature over the step.
    fn discharge(&mut self, q_kw: f64, dt: f64, cp: f64, t_ret_design: f64, dt_min: f64) -> f64 {
        if q_kw <= 0.0 {
            return self.outlet().max(t_ret_design);
        }
        let rise = |out: f64| (t_ret_design.max(out + dt_min) - out).max(dt_min);
        let flow_max = q_kw / (cp * dt_min);
        let n_sub = ((2.0 * flow_max * dt / self.layer_mass).ceil() as usize).max(1);
        let h = dt / n_sub as f64;
        let mut ret_sum = 0.0;
        for _ in 0..n_sub {
            let out = self.outlet();
            let t_ret = out + rise(out);
            ret_sum += t_ret;
            let courant = (q_kw / (cp * rise(out))) * h / self.layer_mass;
            let mut upstream = t_ret;
            for t in self.t.iter_mut() {
                let old = *t;
                *t += courant * (upstream - old);
                upstream = old;
            }
        }
        ret_sum / n_sub as f64
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn saturation_ratio(t: f64) -> Result<f64> {
    psychro::humidity_ratio(&MoistAirState::new(t, 100.0)?)
}

fn weather_series(cfg: &SynthConfig, start: NaiveDateTime, rng: &mut ChaCha8Rng) -> Vec<WeatherRecord> {
    let p = &cfg.weather;
    let mut out = Vec::with_capacity(cfg.days * STEPS_PER_DAY);
    let mut day_anomaly = 0.0;
    let mut step_noise = 0.0;
    for d in 0..cfg.days {
        day_anomaly = p.daily_ar * day_anomaly + p.daily_sd_k * normal(rng);
        let day_mean = p.t_mean_degc + day_anomaly;
        let rh_day = p.rh_mean_pct - 2.0 * day_anomaly + p.rh_daily_sd_pct * normal(rng);
        let clearness = p.clearness_min + (1.0 - p.clearness_min) * rng.gen::<f64>();
        for k in 0..STEPS_PER_DAY {
            step_noise = p.step_ar * step_noise + p.step_sd_k * normal(rng);
            let hour = k as f64 * TIMESTEP_S / 3600.0;
            let cycle = (2.0 * std::f64::consts::PI * (hour - p.t_peak_hour + 6.0) / 24.0).sin();
            let t_oa = day_mean + p.t_amplitude_k * cycle + step_noise;
            let rh_oa = (rh_day - p.rh_slope_pct_per_k * (t_oa - day_mean)).clamp(25.0, 98.0);
            let sun = (std::f64::consts::PI * (hour - 6.0) / 13.0).sin().max(0.0);
            out.push(WeatherRecord {
                timestamp: start + Duration::seconds(((d * STEPS_PER_DAY + k) as f64 * TIMESTEP_S) as i64),
                t_oa: round_to(t_oa, 2),
                rh_oa: round_to(rh_oa, 1),
                q_sol: round_to(p.solar_peak_w * clearness * sun, 1),
            });
        }
    }
    out
}

fn schedule_series(cfg: &SynthConfig, weather: &[WeatherRecord], end_hours: &[u32]) -> Vec<ScheduleRecord> {
    let s = &cfg.schedule;
    weather
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let end_hour = end_hours[k / STEPS_PER_DAY];
            let hour = w.timestamp.hour();
            let since_start = (w.timestamp.hour() * 60 + w.timestamp.minute()) as f64 / 60.0 - s.ahu_start_hour as f64;
            let on = (s.ahu_start_hour..end_hour).contains(&hour);
            let q_int = if !on {
                s.q_int_unoccupied_w
            } else if hour == 12 {
                s.q_int_occupied_w * s.lunch_factor
            } else if hour + 1 == end_hour {
                s.q_int_occupied_w * s.leaving_factor
            } else {
                s.q_int_occupied_w
            };
            ScheduleRecord {
                timestamp: w.timestamp,
                t_set: if on && s.start_ramp_h > 0.0 {
                    s.t_set_degc + s.start_offset_k * (1.0 - since_start / s.start_ramp_h).max(0.0)
                } else {
                    s.t_set_degc
                },
                ahu_on: on,
                q_int,
            }
        })
        .collect()
}

/// Simulate a season. Deterministic for a given configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let start = cfg.start()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weather = weather_series(cfg, start, &mut rng);
    let [c_lo, c_hi] = cfg.charge_range_degc;
    let charges: Vec<f64> = (0..cfg.days).map(|_| round_to(rng.gen_range(c_lo..=c_hi), 2)).collect();
    let s = &cfg.schedule;
    let end_hours: Vec<u32> = (0..cfg.days)
        .map(|_| rng.gen_range(s.ahu_end_hour - s.end_jitter_h..=s.ahu_end_hour + s.end_jitter_h))
        .collect();
    let schedule = schedule_series(cfg, &weather, &end_hours);

    let m = &cfg.moisture;
    let dt = TIMESTEP_S;
    let n = weather.len();
    let mut state = cfg.initial_state;
    let mut w_in = saturation_ratio(state.t_room)? * 0.55;
    let mut tank = LayeredTank::new(&cfg.tank, cfg.layers, charges[0]);

    let mut truth = Vec::with_capacity(n);
    let mut tes_log = Vec::with_capacity(n);
    let mut bas_minute = Vec::with_capacity(n * 5);

    for k in 0..n {
        let day = k / STEPS_PER_DAY;
        if k % STEPS_PER_DAY == 0 {
            tank = LayeredTank::new(&cfg.tank, cfg.layers, charges[day]);
        }
        let wx = &weather[k];
        let sc = &schedule[k];
        let inputs = RcInputs {
            t_oa: wx.t_oa,
            q_sol: wx.q_sol,
            q_int: sc.q_int,
            t_set: sc.t_set,
            ahu_on: sc.ahu_on,
        };
        w_in = w_in.min(saturation_ratio(state.t_room)?);
        let rh_in = psychro::rh_from_ratio(state.t_room, w_in)?;
        let t_w = tank.outlet();

        let q_required = rcload::required_load(&state, &inputs, &cfg.envelope);
        let need_kw = q_required / 1000.0 / cfg.shr;
        let (q_coil, saturated, valve) = if sc.ahu_on && need_kw > 0.0 {
            let cap = cfg.coil.capacity(state.t_room, rh_in, t_w)?;
            if need_kw > cap {
                (cap, true, 100.0)
            } else {
                (need_kw, false, 100.0 * need_kw / cap)
            }
        } else {
            (0.0, false, 0.0)
        };
        let q_delivered = q_coil * cfg.shr * 1000.0;
        let q_tank = q_coil * cfg.scaling_factor;

        tes_log.push(TesLogRecord {
            timestamp: wx.timestamp,
            q_load: q_tank,
            t_avg: tank.mean(),
            t_out: t_w,
            t_top: tank.t[cfg.top_sensor_layer],
            t_bottom: tank.t[cfg.bottom_sensor_layer],
            operating: sc.ahu_on,
        });
        truth.push(TruthRecord {
            timestamp: wx.timestamp,
            t_room: state.t_room,
            t_mass: state.t_mass,
            rh_in,
            q_required,
            q_delivered,
            q_coil,
            q_tank,
            t_w_in: t_w,
            saturated,
            t_charge: charges[day],
        });

        let t_ret = tank.discharge(
            q_tank,
            dt,
            cfg.tank.cp_water,
            cfg.t_return_design_degc,
            cfg.dt_water_min_k,
        );

        let cp = psychro::moist_air_cp(w_in);
        let t_sa = if sc.ahu_on {
            state.t_room - q_delivered / 1000.0 / (RATED_AIRFLOW_KG_S * cp)
        } else {
            state.t_room
        };
        let oa_fraction = 0.0585;
        let analog = [
            state.t_room + if sc.ahu_on { 0.3 } else { 0.0 },
            state.t_room,
            wx.t_oa,
            (1.0 - oa_fraction) * state.t_room + oa_fraction * wx.t_oa,
            t_sa,
            sc.t_set,
            rh_in,
            valve,
            t_w,
            if q_tank > 0.0 { t_ret } else { t_w },
            tank.t[cfg.top_sensor_layer],
            tank.t[cfg.bottom_sensor_layer],
        ];
        for minute in 0..5 {
            let mut a = analog;
            if cfg.bas_noise_k > 0.0 {
                for (c, v) in a.iter_mut().enumerate() {
                    if !matches!(c, 5..=7) {
                        *v += cfg.bas_noise_k * normal(&mut rng);
                    }
                }
            }
            for (c, v) in a.iter_mut().enumerate() {
                *v = round_to(*v, if matches!(c, 6 | 7) { 1 } else { 2 });
            }
            bas_minute.push(BasRecord::from_analog(
                wx.timestamp + Duration::minutes(minute),
                a,
                sc.ahu_on,
            ));
        }

        // zone moisture
        let w_oa = psychro::humidity_ratio(&MoistAirState::new(wx.t_oa, wx.rh_oa)?)?;
        let w_sa = if q_coil > 0.0 {
            w_in.min(saturation_ratio(t_w + m.coil_approach_k)?)
        } else {
            w_in
        };
        let occupied = sc.ahu_on;
        let dw = (w_oa - w_in) / (m.infiltration_tau_h * 3600.0)
            + if occupied { m.latent_gain_per_h / 3600.0 } else { 0.0 }
            - if sc.ahu_on {
                (w_in - w_sa) / (m.ahu_tau_h * 3600.0)
            } else {
                0.0
            };
        w_in = (w_in + dt * dw).max(1e-4);

        let (dr, dm) = rcload::derivatives(&state, &inputs, &cfg.envelope, q_delivered);
        state = RcState {
            t_room: state.t_room + dt * dr,
            t_mass: state.t_mass + dt * dm,
        };
        if !(state.t_room.is_finite() && state.t_mass.is_finite()) {
            return Err(Error::NumericalInstability(format!(
                "synthetic zone diverged at step {k}"
            )));
        }
    }

    let tes_daily = daily_aggregate(&tes_log, dt, STEPS_PER_DAY);
    Ok(SynthDataset {
        weather,
        schedule,
        bas_minute,
        tes_log,
        tes_daily,
        truth,
    })
}

pub const WEATHER_FILE: &str = "weather.csv";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const BAS_FILE: &str = "bas_1min.csv";
pub const TES_LOG_FILE: &str = "tes_log.csv";
pub const TES_DAILY_FILE: &str = "tes_daily.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SIDECAR_FILE: &str = "truth.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub days: usize,
    pub files: Vec<ManifestEntry>,
}

/// Ground truth sidecar: the full generator configuration.
pub fn sidecar_text(cfg: &SynthConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<SynthConfig> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}

/// Write every dataset file plus a manifest of checksums into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, cfg: &SynthConfig, data: &SynthDataset) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        fs::write(dir.join(name), &bytes)?;
        files.push(ManifestEntry {
            file: name.to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    };
    let mut buf = Vec::new();
    write_weather_csv(&mut buf, &data.weather)?;
    emit(WEATHER_FILE, std::mem::take(&mut buf))?;
    write_schedule_csv(&mut buf, &data.schedule)?;
    emit(SCHEDULE_FILE, std::mem::take(&mut buf))?;
    write_bas_csv(&mut buf, &data.bas_minute)?;
    emit(BAS_FILE, std::mem::take(&mut buf))?;
    write_tes_log_csv(&mut buf, &data.tes_log)?;
    emit(TES_LOG_FILE, std::mem::take(&mut buf))?;
    write_tes_daily_csv(&mut buf, &data.tes_daily)?;
    emit(TES_DAILY_FILE, std::mem::take(&mut buf))?;
    write_truth_csv(&mut buf, &data.truth)?;
    emit(TRUTH_FILE, std::mem::take(&mut buf))?;
    emit(SIDECAR_FILE, sidecar_text(cfg)?.into_bytes())?;
    let manifest = Manifest {
        seed: cfg.seed,
        days: cfg.days,
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}
