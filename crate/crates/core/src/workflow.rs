//! Command-level stages behind the `chargeopt` binary.
//!
//! Every stage reads and writes plain files in the directories named by a
//! [`RunConfig`]: `data_dir` holds the weather, schedule, BAS and tank logs,
//! `model_dir` the four calibrated model stores and `output_dir` the
//! validation tables and season reports.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::coil::{self, CoilModel, CoilRecord, UaIdentification};
use crate::error::{Error, Result};
use crate::humidity::{self, HumidityEnsemble, HumidityExogenous, HumidityObservation, HumidityTrainOptions};
use crate::ingest::bas::{read_bas_csv, write_bas_csv, BasRecord, BAS_HEADER};
use crate::ingest::daily::{
    daily_aggregate, read_tes_daily_csv, read_tes_log_csv, write_tes_daily_csv, TesDailyRow, TES_DAILY_HEADER,
    TES_LOG_HEADER,
};
use crate::ingest::resample::resample_5min;
use crate::ingest::schedule::{read_schedule_csv, ScheduleRecord, SCHEDULE_HEADER};
use crate::ingest::synth::{self, Manifest, SynthConfig, TRUTH_HEADER};
use crate::ingest::weather::{self, read_weather_csv, WeatherRecord, WEATHER_HEADER};
use crate::ingest::{format_timestamp, parse_timestamp};
use crate::metrics::{self, BlandAltman, MetricReport, REPORT_HEADER};
use crate::optimizer::{
    self, DayContext, DayPlan, EvaluateOptions, ModelSet, OptimizeOptions, SeasonReport, StepForecast, PANEL_HEADER,
    SEASON_REPORT_HEADER, TRAJECTORY_HEADER,
};
use crate::psychro::{self, MoistAirState};
use crate::rcload::{self, Calibration, CalibrationOptions, RcInputs, RcParams, RcSample, RcState};
use crate::regressor::GbtModel;
use crate::tes::{self, TesConfig, TesFit};
use crate::{cmh_to_kg_s, STEPS_PER_DAY, TIMESTEP_S};

pub const BAS_5MIN_FILE: &str = "bas_5min.csv";
pub const INGEST_ERRORS_FILE: &str = "ingest_errors.csv";
pub const RC_STORE: &str = "rc.toml";
pub const HUMIDITY_STORE: &str = "humidity.txt";
pub const COIL_STORE: &str = "coil.txt";
pub const TES_STORE: &str = "tes_curves.toml";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const BLAND_ALTMAN_PEAK_FILE: &str = "bland_altman_peak.csv";
pub const BLAND_ALTMAN_END_FILE: &str = "bland_altman_end.csv";
pub const SEASON_REPORT_FILE: &str = "season_report.csv";
pub const PANELS_FILE: &str = "panels.csv";
pub const PLANS_DIR: &str = "plans";

/// Settings shared by every command. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub timestep_s: f64,
    /// Whole-building to reference-coil load ratio.
    pub scaling_factor: f64,
    pub airflow_cmh: f64,
    pub shr: f64,
    /// Leading days used to calibrate the load and humidity models.
    pub training_days: usize,
    /// Days validated after the training period; 0 means all remaining.
    pub holdout_days: usize,
    pub rc_starts: usize,
    pub tolerance_degc: f64,
    pub baseline_degc: f64,
    /// Check the outlet against the limit at every operating step, not only
    /// at the peak and the end of operation.
    pub strict_peak_check: bool,
    pub tes: TesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            model_dir: "models".into(),
            output_dir: "out".into(),
            seed: 2024,
            timestep_s: TIMESTEP_S,
            scaling_factor: 1.8,
            airflow_cmh: humidity::DESIGN_AIRFLOW_CMH,
            shr: coil::DEFAULT_SHR,
            training_days: 14,
            holdout_days: 28,
            rc_starts: 20,
            tolerance_degc: optimizer::DEFAULT_TOLERANCE_DEGC,
            baseline_degc: optimizer::DEFAULT_BASELINE_DEGC,
            strict_peak_check: false,
            tes: TesConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.data_dir, &mut cfg.model_dir, &mut cfg.output_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestep_s != TIMESTEP_S {
            return Err(Error::Config(format!(
                "timestep_s must be {TIMESTEP_S}, got {}",
                self.timestep_s
            )));
        }
        if !(self.scaling_factor >= 1.0) {
            return Err(Error::Config("scaling_factor must be >= 1".into()));
        }
        if !(self.airflow_cmh > 0.0) {
            return Err(Error::Config("airflow_cmh must be > 0".into()));
        }
        if !(self.shr > 0.0 && self.shr <= 1.0) {
            return Err(Error::Config("shr must lie in (0, 1]".into()));
        }
        if self.training_days == 0 {
            return Err(Error::Config("training_days must be >= 1".into()));
        }
        if !(self.tolerance_degc > 0.0) {
            return Err(Error::Config("tolerance_degc must be > 0".into()));
        }
        self.tes.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.tes.t_min..=self.tes.t_max).contains(&self.baseline_degc) {
            return Err(Error::Config("baseline_degc must lie inside the tank box".into()));
        }
        Ok(())
    }

    pub fn airflow(&self) -> f64 {
        cmh_to_kg_s(self.airflow_cmh)
    }

    fn data(&self, name: &str) -> PathBuf {
        self.data_dir.join(name)
    }

    fn model(&self, name: &str) -> PathBuf {
        self.model_dir.join(name)
    }

    fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Generate a synthetic season into `out_dir`.
pub fn cmd_synth(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let data = synth::generate(cfg)?;
    synth::write_dataset(out_dir, cfg, &data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub minute_rows: usize,
    pub rejected_rows: usize,
    pub bins: usize,
    pub partial_bins: usize,
    /// Daily tank rows rebuilt from the tank log, when one is present.
    pub tank_days: Option<usize>,
}

/// Resample the 1-minute BAS log to 5 minutes and rebuild the daily tank
/// aggregates. Rejected rows are listed in `ingest_errors.csv`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let parsed = read_bas_csv(open(&cfg.data(synth::BAS_FILE))?)?;
    for e in &parsed.errors {
        log::warn!("{} line {}: {}", synth::BAS_FILE, e.line, e.message);
    }
    if parsed.records.is_empty() {
        return Err(Error::invalid(format!("{} has no usable rows", synth::BAS_FILE)));
    }
    let five = resample_5min(&parsed.records);
    write_bas_csv(fs::File::create(cfg.data(BAS_5MIN_FILE))?, &five.records)?;

    let mut out = csv::Writer::from_path(cfg.data(INGEST_ERRORS_FILE))?;
    out.write_record(["line", "message"])?;
    for e in &parsed.errors {
        out.write_record([e.line.to_string(), e.message.clone()])?;
    }
    out.flush()?;

    let log_path = cfg.data(synth::TES_LOG_FILE);
    let tank_days = if log_path.exists() {
        let log = read_tes_log_csv(open(&log_path)?)?;
        let daily = daily_aggregate(&log, TIMESTEP_S, STEPS_PER_DAY);
        write_tes_daily_csv(fs::File::create(cfg.data(synth::TES_DAILY_FILE))?, &daily)?;
        Some(daily.len())
    } else {
        None
    };
    Ok(IngestSummary {
        minute_rows: parsed.records.len(),
        rejected_rows: parsed.errors.len(),
        bins: five.records.len(),
        partial_bins: five.partial_bins.len(),
        tank_days,
    })
}

/// One 5-minute step of the aligned dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStep {
    pub timestamp: NaiveDateTime,
    pub forecast: StepForecast,
    pub bas: BasRecord,
}

impl ObservedStep {
    /// Measured sensible load (W) from the air-side temperature drop.
    pub fn measured_load(&self, airflow: f64) -> f64 {
        let b = &self.bas;
        if !b.s1_fan {
            return 0.0;
        }
        let w = MoistAirState::new(b.t2_ra, b.h1_ra)
            .and_then(|s| psychro::humidity_ratio(&s))
            .unwrap_or(0.0);
        (airflow * psychro::moist_air_cp(w) * (b.t2_ra - b.t5_sa) * 1000.0).max(0.0)
    }

    pub fn rc_inputs(&self) -> RcInputs {
        RcInputs {
            t_oa: self.bas.t3_oa,
            q_sol: self.forecast.q_sol,
            q_int: self.forecast.q_int,
            t_set: self.bas.t6_set,
            ahu_on: self.bas.s1_fan,
        }
    }

    pub fn rc_sample(&self, airflow: f64) -> RcSample {
        RcSample {
            inputs: self.rc_inputs(),
            t_room: self.bas.t2_ra,
            q: self.measured_load(airflow),
        }
    }

    pub fn humidity_exogenous(&self) -> HumidityExogenous {
        HumidityExogenous {
            t_oa: self.bas.t3_oa,
            rh_oa: self.forecast.rh_oa,
            t_in: self.bas.t2_ra,
            t_set: self.bas.t6_set,
            ahu_on: self.bas.s1_fan,
        }
    }

    pub fn coil_record(&self, airflow: f64) -> CoilRecord {
        let b = &self.bas;
        CoilRecord {
            t_ra: b.t2_ra,
            t_sa: b.t5_sa,
            rh_ra: b.h1_ra,
            t_w_in: b.t7_chws,
            valve: b.v1_valve,
            fan_on: b.s1_fan,
            airflow,
        }
    }
}

fn forecasts(weather: &[WeatherRecord], schedule: &[ScheduleRecord]) -> Result<Vec<(NaiveDateTime, StepForecast)>> {
    if weather.len() != schedule.len() {
        return Err(Error::Parse(format!(
            "weather has {} rows but the schedule has {}",
            weather.len(),
            schedule.len()
        )));
    }
    let Some(first) = weather.first() else {
        return Err(Error::invalid("weather file is empty"));
    };
    if first.timestamp.time().num_seconds_from_midnight() != 0 {
        return Err(Error::Parse("weather must start at midnight".into()));
    }
    if !weather.len().is_multiple_of(STEPS_PER_DAY) {
        return Err(Error::Parse(format!(
            "weather covers {} steps, not whole days",
            weather.len()
        )));
    }
    let step = chrono::Duration::seconds(TIMESTEP_S as i64);
    weather
        .iter()
        .zip(schedule)
        .enumerate()
        .map(|(k, (w, s))| {
            let expected = first.timestamp + step * k as i32;
            if w.timestamp != expected {
                return Err(Error::Parse(format!(
                    "forecast gap: expected {}",
                    format_timestamp(&expected)
                )));
            }
            if s.timestamp != w.timestamp {
                return Err(Error::Parse(format!(
                    "schedule row {} does not match weather time {}",
                    format_timestamp(&s.timestamp),
                    format_timestamp(&w.timestamp)
                )));
            }
            Ok((
                w.timestamp,
                StepForecast {
                    t_oa: w.t_oa,
                    rh_oa: w.rh_oa,
                    q_sol: w.q_sol,
                    t_set: s.t_set,
                    ahu_on: s.ahu_on,
                    q_int: s.q_int,
                },
            ))
        })
        .collect()
}

fn read_forecasts(cfg: &RunConfig) -> Result<Vec<(NaiveDateTime, StepForecast)>> {
    let weather = read_weather_csv(open(&cfg.data(synth::WEATHER_FILE))?)?;
    if let Some(e) = weather::validate(&weather).first() {
        return Err(Error::Parse(format!(
            "{} line {}: {}",
            synth::WEATHER_FILE,
            e.line,
            e.message
        )));
    }
    let schedule = read_schedule_csv(open(&cfg.data(synth::SCHEDULE_FILE))?)?;
    forecasts(&weather, &schedule)
}

/// Weather, schedule and the 5-minute BAS log joined on timestamp.
pub fn load_observed(cfg: &RunConfig) -> Result<Vec<ObservedStep>> {
    let fc = read_forecasts(cfg)?;
    let path = cfg.data(BAS_5MIN_FILE);
    if !path.exists() {
        return Err(Error::invalid(format!(
            "{} not found; run `ingest` first",
            path.display()
        )));
    }
    let parsed = read_bas_csv(open(&path)?)?;
    if let Some(e) = parsed.errors.first() {
        return Err(Error::Parse(format!("{BAS_5MIN_FILE} line {}: {}", e.line, e.message)));
    }
    let by_time: HashMap<NaiveDateTime, BasRecord> = parsed.records.iter().map(|r| (r.timestamp, *r)).collect();
    fc.into_iter()
        .map(|(timestamp, forecast)| {
            let bas = by_time.get(&timestamp).copied().ok_or_else(|| {
                Error::Parse(format!(
                    "{BAS_5MIN_FILE} has no row for {}",
                    format_timestamp(&timestamp)
                ))
            })?;
            Ok(ObservedStep {
                timestamp,
                forecast,
                bas,
            })
        })
        .collect()
}

fn read_tank_days(cfg: &RunConfig) -> Result<Vec<TesDailyRow>> {
    read_tes_daily_csv(open(&cfg.data(synth::TES_DAILY_FILE))?)
}

/// Stored form of the tank curves with their fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TesStore {
    fit: TesFit,
}

pub fn save_tes_fit(fit: &TesFit, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string(&TesStore { fit: *fit }).map_err(|e| Error::ModelStore(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_tes_fit(path: impl AsRef<Path>) -> Result<TesFit> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|_| Error::MissingModel(path.display().to_string()))?;
    let store: TesStore = toml::from_str(&text).map_err(|e| Error::ModelStore(format!("tank store: {e}")))?;
    Ok(store.fit)
}

pub fn save_rc(params: &RcParams, state0: &RcState, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, rcload::to_toml(params, state0))?;
    Ok(())
}

pub fn load_rc(path: impl AsRef<Path>) -> Result<(RcParams, RcState)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|_| Error::MissingModel(path.display().to_string()))?;
    rcload::from_toml(&text)
}

/// Calibrated models plus the load model's initial state (at the first
/// sample of the dataset).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModels {
    pub models: ModelSet,
    pub rc_state0: RcState,
}

pub fn load_models(cfg: &RunConfig) -> Result<LoadedModels> {
    let (rc, rc_state0) = load_rc(cfg.model(RC_STORE))?;
    let humidity = HumidityEnsemble::load(cfg.model(HUMIDITY_STORE))?;
    let coil = CoilModel::load(cfg.model(COIL_STORE))?;
    let fit = load_tes_fit(cfg.model(TES_STORE))?;
    Ok(LoadedModels {
        models: ModelSet {
            humidity: Some(humidity),
            rc,
            coil,
            curves: fit.curves,
            tes: cfg.tes,
        },
        rc_state0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    pub rc: Calibration,
    pub humidity_weight: f64,
    pub ua: UaIdentification,
    pub rated_records: usize,
    pub tes: TesFit,
    /// Load model on the days after the training period.
    pub rc_holdout_room: Option<MetricReport>,
    pub rc_holdout_load: Option<MetricReport>,
}

/// Calibrate all four sub-models and write their stores. Stores of
/// sub-models that succeed are written even when another one fails.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CalibrationSummary> {
    let observed = load_observed(cfg)?;
    let tank_days = read_tank_days(cfg)?;
    fs::create_dir_all(&cfg.model_dir)?;
    let airflow = cfg.airflow();
    let n_train = (cfg.training_days * STEPS_PER_DAY).min(observed.len());
    let train = &observed[..n_train];
    let mut failures = Vec::new();

    let samples: Vec<RcSample> = train.iter().map(|s| s.rc_sample(airflow)).collect();
    let rc_opts = CalibrationOptions {
        starts: cfg.rc_starts,
        seed: cfg.seed,
        ..CalibrationOptions::default()
    };
    let rc = match rcload::calibrate(&samples, &rcload::default_init(), &rc_opts) {
        Ok(c) => {
            save_rc(&c.params, &c.state0, cfg.model(RC_STORE))?;
            Some(c)
        }
        Err(e) => {
            log::error!("rcload: {e}");
            failures.push(e);
            None
        }
    };

    let history: Vec<HumidityObservation> = train
        .iter()
        .map(|s| HumidityObservation {
            exo: s.humidity_exogenous(),
            rh_in: s.bas.h1_ra,
        })
        .collect();
    let h_opts = HumidityTrainOptions {
        seed: cfg.seed,
        airflow_cmh: cfg.airflow_cmh,
        ..HumidityTrainOptions::default()
    };
    let humidity = match humidity::train(&history, &h_opts) {
        Ok(t) => {
            t.ensemble.save(cfg.model(HUMIDITY_STORE))?;
            Some(t)
        }
        Err(e) => {
            log::error!("humidity: {e}");
            failures.push(e);
            None
        }
    };

    let records: Vec<CoilRecord> = observed.iter().map(|s| s.coil_record(airflow)).collect();
    let rated = coil::filter_rated(&records);
    let coil_fit = coil::identify_ua_ref(&rated, cfg.shr).and_then(|ua| {
        let base = CoilModel {
            shr: cfg.shr,
            ..CoilModel::physics_only(ua.ua_ref)
        };
        let model = coil::train_residual(&rated, &base, cfg.seed)?;
        Ok((ua, model))
    });
    let coil_fit = match coil_fit {
        Ok((ua, model)) => {
            model.save(cfg.model(COIL_STORE))?;
            Some(ua)
        }
        Err(e) => {
            log::error!("coil: {e}");
            failures.push(e);
            None
        }
    };

    let obs: Vec<tes::TesDayObservation> = tank_days.iter().filter_map(|d| d.observation()).collect();
    let tes_fit = match tes::fit_curves(&obs, &cfg.tes) {
        Ok(fit) => {
            if !fit.peak_monotone {
                log::warn!("fitted peak outlet curve is not monotone; the optimizer will verify by grid scan");
            }
            save_tes_fit(&fit, cfg.model(TES_STORE))?;
            Some(fit)
        }
        Err(e) => {
            log::error!("tes: {e}");
            failures.push(e);
            None
        }
    };

    let (Some(rc), Some(humidity), Some(ua), Some(tes_fit)) = (rc, humidity, coil_fit, tes_fit) else {
        return Err(Error::Calibration(failures));
    };

    let (room, load) = rc_holdout(cfg, &observed, &rc.params, rc.state0)?;
    let summary = CalibrationSummary {
        humidity_weight: humidity.ensemble.weight_a,
        rated_records: rated.len(),
        rc,
        ua,
        tes: tes_fit,
        rc_holdout_room: room,
        rc_holdout_load: load,
    };
    write_calibration_report(cfg, &summary)?;
    Ok(summary)
}

/// Open-loop replay of the load model from the first sample, scored on
/// the holdout period.
fn rc_holdout(
    cfg: &RunConfig,
    observed: &[ObservedStep],
    params: &RcParams,
    state0: RcState,
) -> Result<(Option<MetricReport>, Option<MetricReport>)> {
    let (a, b) = holdout_range(cfg, observed.len());
    if b <= a + 1 {
        return Ok((None, None));
    }
    let inputs: Vec<RcInputs> = observed[..b].iter().map(|s| s.rc_inputs()).collect();
    let pred = rcload::predict_series(params, state0, &inputs, TIMESTEP_S)?;
    let t_meas: Vec<f64> = observed[a..b].iter().map(|s| s.bas.t2_ra).collect();
    let q_meas: Vec<f64> = observed[a..b].iter().map(|s| s.measured_load(cfg.airflow())).collect();
    Ok((
        metrics::compute(&t_meas, &pred.t_room[a..b]).ok(),
        metrics::compute(&q_meas, &pred.q_required[a..b]).ok(),
    ))
}

fn holdout_range(cfg: &RunConfig, n: usize) -> (usize, usize) {
    let a = (cfg.training_days * STEPS_PER_DAY).min(n);
    let b = if cfg.holdout_days == 0 {
        n
    } else {
        (a + cfg.holdout_days * STEPS_PER_DAY).min(n)
    };
    (a, b)
}

fn write_calibration_report(cfg: &RunConfig, s: &CalibrationSummary) -> Result<()> {
    let mut out = csv::Writer::from_path(cfg.model(CALIBRATION_FILE))?;
    out.write_record(["model", "quantity", "value"])?;
    let p = &s.rc.params;
    let rows: Vec<(&str, &str, String)> = vec![
        ("rcload", "objective", format!("{:.6}", s.rc.objective)),
        ("rcload", "r_env1_k_per_w", format!("{:.6e}", p.r_env1)),
        ("rcload", "r_env2_k_per_w", format!("{:.6e}", p.r_env2)),
        ("rcload", "r_env3_k_per_w", format!("{:.6e}", p.r_env3)),
        ("rcload", "c_mass_j_per_k", format!("{:.6e}", p.c_mass)),
        ("rcload", "c_air_j_per_k", format!("{:.6e}", p.c_air)),
        (
            "rcload",
            "holdout_room_cvrmse_pct",
            s.rc_holdout_room
                .map(|m| format!("{:.4}", m.cvrmse))
                .unwrap_or_default(),
        ),
        (
            "rcload",
            "holdout_load_cvrmse_pct",
            s.rc_holdout_load
                .map(|m| format!("{:.4}", m.cvrmse))
                .unwrap_or_default(),
        ),
        ("humidity", "weight_a", format!("{:.1}", s.humidity_weight)),
        ("coil", "rated_records", s.rated_records.to_string()),
        ("coil", "flagged_records", s.ua.flagged.to_string()),
        ("coil", "ua_ref_kw_per_k", format!("{:.6}", s.ua.ua_ref)),
        ("tes", "peak_r2", format!("{:.6}", s.tes.peak.r2)),
        ("tes", "end_r2", format!("{:.6}", s.tes.end.r2)),
        ("tes", "peak_monotone", (s.tes.peak_monotone as u8).to_string()),
    ];
    for (m, q, v) in rows {
        out.write_record([m, q, v.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub label: String,
    pub kind: &'static str,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub rows: Vec<ValidationRow>,
    pub weeks: usize,
    pub peak: BlandAltman,
    pub end: BlandAltman,
}

/// Score the calibrated models on the holdout period in weekly blocks
/// (the last block may be shorter) plus a whole-holdout row, and the tank
/// curves on every observed day.
pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationSummary> {
    let observed = load_observed(cfg)?;
    let loaded = load_models(cfg)?;
    let m = &loaded.models;
    let (a, b) = holdout_range(cfg, observed.len());
    if b <= a {
        return Err(Error::InsufficientData {
            model: "validation holdout",
            required: (cfg.training_days + 1) * STEPS_PER_DAY,
            actual: observed.len(),
        });
    }
    let airflow = cfg.airflow();
    let inputs: Vec<RcInputs> = observed[..b].iter().map(|s| s.rc_inputs()).collect();
    let pred = rcload::predict_series(&m.rc, loaded.rc_state0, &inputs, TIMESTEP_S)?;
    let rh_pred = humidity_replay(m.humidity.as_ref(), &observed, a, b)?;

    let week = 7 * STEPS_PER_DAY;
    let mut blocks: Vec<(String, usize, usize)> = (a..b)
        .step_by(week)
        .enumerate()
        .map(|(i, s)| (format!("week {}", i + 1), s, (s + week).min(b)))
        .collect();
    let weeks = blocks.len();
    blocks.push(("holdout".into(), a, b));

    let mut rows = Vec::new();
    for (label, s, e) in &blocks {
        let t_meas: Vec<f64> = observed[*s..*e].iter().map(|o| o.bas.t2_ra).collect();
        let q_meas: Vec<f64> = observed[*s..*e]
            .iter()
            .map(|o| o.measured_load(airflow) / 1000.0)
            .collect();
        let q_pred: Vec<f64> = pred.q_required[*s..*e].iter().map(|q| q / 1000.0).collect();
        let rh_meas: Vec<f64> = observed[*s..*e].iter().map(|o| o.bas.h1_ra).collect();
        let mut push = |what: &str, kind: &'static str, r: Result<MetricReport>| match r {
            Ok(report) => rows.push(ValidationRow {
                label: format!("{label} {what}"),
                kind,
                report,
            }),
            Err(err) => log::warn!("{label} {what}: {err}"),
        };
        push(
            "room temperature",
            "instantaneous",
            metrics::compute(&t_meas, &pred.t_room[*s..*e]),
        );
        push("load", "instantaneous", metrics::compute(&q_meas, &q_pred));
        push("load", "cumulative", metrics::cumulative_compare(&q_meas, &q_pred));
        push(
            "humidity",
            "instantaneous",
            metrics::compute(&rh_meas, &rh_pred[*s - a..*e - a]),
        );
    }

    let records: Vec<CoilRecord> = observed.iter().map(|s| s.coil_record(airflow)).collect();
    let (q_meas, q_pred) = coil_pairs(&coil::filter_rated(&records), &m.coil);
    match metrics::compute(&q_meas, &q_pred) {
        Ok(report) => rows.push(ValidationRow {
            label: "coil rated capacity".into(),
            kind: "instantaneous",
            report,
        }),
        Err(e) => log::warn!("coil: {e}"),
    }

    let days: Vec<tes::TesDayObservation> = read_tank_days(cfg)?.iter().filter_map(|d| d.observation()).collect();
    let peak_meas: Vec<f64> = days.iter().map(|d| d.t_out_peak).collect();
    let peak_pred: Vec<f64> = days
        .iter()
        .map(|d| tes::peak_outlet(d.t_avg_peak, d.t_init, &m.curves, &m.tes).value)
        .collect();
    let end_meas: Vec<f64> = days.iter().map(|d| d.t_out_end).collect();
    let end_pred: Vec<f64> = days
        .iter()
        .map(|d| {
            m.curves
                .end_raw(d.t_avg_end, d.t_avg_end - d.t_init, d.q_cum / d.elapsed)
        })
        .collect();
    rows.push(ValidationRow {
        label: "tank outlet at peak".into(),
        kind: "instantaneous",
        report: metrics::compute(&peak_meas, &peak_pred)?,
    });
    rows.push(ValidationRow {
        label: "tank outlet at end".into(),
        kind: "instantaneous",
        report: metrics::compute(&end_meas, &end_pred)?,
    });
    let peak = metrics::bland_altman(&peak_meas, &peak_pred)?;
    let end = metrics::bland_altman(&end_meas, &end_pred)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = csv::Writer::from_path(cfg.output(VALIDATION_FILE))?;
    out.write_record(REPORT_HEADER)?;
    for r in &rows {
        out.write_record(r.report.csv_row(&r.label, r.kind))?;
    }
    out.flush()?;
    peak.write_csv(fs::File::create(cfg.output(BLAND_ALTMAN_PEAK_FILE))?)?;
    end.write_csv(fs::File::create(cfg.output(BLAND_ALTMAN_END_FILE))?)?;
    Ok(ValidationSummary { rows, weeks, peak, end })
}

/// Day-by-day recursive humidity forecast over `[a, b)`, each day seeded
/// with the last measured value before it.
fn humidity_replay(ens: Option<&HumidityEnsemble>, observed: &[ObservedStep], a: usize, b: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(b - a);
    let mut s = a;
    while s < b {
        let e = (s + STEPS_PER_DAY).min(b);
        let rh_init = observed[s.saturating_sub(1)].bas.h1_ra;
        match ens {
            Some(ens) => {
                let exo: Vec<HumidityExogenous> = observed[s..e].iter().map(|o| o.humidity_exogenous()).collect();
                out.extend(ens.forecast_day(&exo, rh_init)?);
            }
            None => out.extend(std::iter::repeat_n(rh_init, e - s)),
        }
        s = e;
    }
    Ok(out)
}

/// Measured and predicted coil duty (kW) on rated records.
fn coil_pairs(rated: &[CoilRecord], model: &CoilModel) -> (Vec<f64>, Vec<f64>) {
    rated
        .iter()
        .filter_map(|r| {
            let m = coil::measured_effectiveness(r, model.shr).ok()?;
            let p = coil::predict_performance(model, r.t_ra, r.rh_ra, r.t_w_in, r.airflow).ok()?;
            Some((m.q_est, p.q))
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSummary {
    pub plans: Vec<DayPlan>,
    pub report: SeasonReport,
}

/// Build the optimizer's day contexts for every whole day of the dataset
/// inside `range` (inclusive). The load model is chained open-loop from the
/// first sample; each day starts from the last RH measured before it.
pub fn day_contexts<'a>(
    cfg: &RunConfig,
    observed: &[ObservedStep],
    loaded: &'a LoadedModels,
    range: Option<(NaiveDate, NaiveDate)>,
) -> Result<Vec<DayContext<'a>>> {
    let m = &loaded.models;
    let mut state = loaded.rc_state0;
    let mut out = Vec::new();
    for (d, day) in observed.chunks(STEPS_PER_DAY).enumerate() {
        let date = day[0].timestamp.date();
        let inputs: Vec<RcInputs> = day
            .iter()
            .map(|s| RcInputs {
                t_oa: s.forecast.t_oa,
                q_sol: s.forecast.q_sol,
                q_int: s.forecast.q_int,
                t_set: s.forecast.t_set,
                ahu_on: s.forecast.ahu_on,
            })
            .collect();
        let in_range = range.is_none_or(|(from, to)| (from..=to).contains(&date));
        if in_range {
            let rh_init = observed[(d * STEPS_PER_DAY).saturating_sub(1)].bas.h1_ra;
            out.push(DayContext {
                label: date.format("%Y-%m-%d").to_string(),
                start: day[0].timestamp,
                steps: day.iter().map(|s| s.forecast).collect(),
                scaling_factor: cfg.scaling_factor,
                rc_state0: state,
                rh_init,
                airflow: cfg.airflow(),
                models: m,
            });
        }
        state = rcload::predict_series(&m.rc, state, &inputs, TIMESTEP_S)?.end_state;
    }
    if out.is_empty() {
        return Err(Error::invalid("no whole days of forecast data in the requested range"));
    }
    Ok(out)
}

pub fn optimize_options(cfg: &RunConfig) -> OptimizeOptions {
    OptimizeOptions {
        tolerance: cfg.tolerance_degc,
        evaluate: EvaluateOptions {
            strict: cfg.strict_peak_check,
        },
        ..OptimizeOptions::default()
    }
}

/// Optimize every day in `range`, write the season report, the plot panel
/// data and one trajectory file per day.
pub fn cmd_optimize(cfg: &RunConfig, range: Option<(NaiveDate, NaiveDate)>) -> Result<OptimizeSummary> {
    let loaded = load_models(cfg)?;
    let observed = load_observed(cfg)?;
    let days = day_contexts(cfg, &observed, &loaded, range)?;
    let plans = optimizer::optimize_season(&days, &optimize_options(cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let report = optimizer::compare_baseline(&plans, cfg.baseline_degc)?;

    let plan_dir = cfg.output(PLANS_DIR);
    fs::create_dir_all(&plan_dir)?;
    report.write_csv(fs::File::create(cfg.output(SEASON_REPORT_FILE))?)?;
    report.write_panels_csv(fs::File::create(cfg.output(PANELS_FILE))?)?;
    for p in &plans {
        optimizer::write_trajectory_csv(fs::File::create(plan_dir.join(format!("{}.csv", p.label)))?, p)?;
    }
    Ok(OptimizeSummary { plans, report })
}

/// Human-readable summary of the season report and, when present, the
/// validation table.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let path = cfg.output(SEASON_REPORT_FILE);
    if !path.exists() {
        return Err(Error::invalid(format!(
            "{} not found; run `optimize` first",
            path.display()
        )));
    }
    let mut rdr = csv::Reader::from_reader(open(&path)?);
    let mut lines = vec![format!(
        "{:<12} {:>8} {:>10} {:>8} {:>10}  {}",
        "date", "feasible", "t* (°C)", "margin", "load kWh", "limit"
    )];
    let (mut margins, mut infeasible, mut days) = (Vec::new(), 0, 0);
    for rec in rdr.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("").to_string();
        days += 1;
        let feasible = field(2) == "1";
        if feasible {
            if let Ok(m) = field(5).parse::<f64>() {
                margins.push(m);
            }
        } else {
            infeasible += 1;
        }
        lines.push(format!(
            "{:<12} {:>8} {:>10} {:>8} {:>10}  {}",
            field(1),
            if feasible { "yes" } else { "NO" },
            field(3),
            field(5),
            field(8),
            field(9)
        ));
    }
    let mean = (!margins.is_empty()).then(|| margins.iter().sum::<f64>() / margins.len() as f64);
    lines.push(format!(
        "{days} days, {infeasible} infeasible, mean margin {}",
        mean.map(|m| format!("{m:+.2} °C")).unwrap_or_else(|| "n/a".into())
    ));

    let vpath = cfg.output(VALIDATION_FILE);
    if vpath.exists() {
        lines.push(String::new());
        let mut rdr = csv::Reader::from_reader(open(&vpath)?);
        for rec in rdr.records() {
            let rec = rec?;
            let f = |k: usize| rec.get(k).unwrap_or("");
            lines.push(format!(
                "{:<40} {:<13} NMBE={:>9}%  CVRMSE={:>9}%  R2={:>7}",
                f(0),
                f(7),
                f(2),
                f(3),
                f(4)
            ));
        }
    }
    Ok(lines.join("\n"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Timestamp,
    Date,
    Num,
    OptNum,
    Flag,
    Int,
    Text,
}

struct CsvSchema {
    name: &'static str,
    header: &'static [&'static str],
    cols: &'static [Col],
}

use Col::*;

const CSV_SCHEMAS: &[CsvSchema] = &[
    CsvSchema {
        name: "bas",
        header: &BAS_HEADER,
        cols: &[
            Timestamp, Num, Num, Num, Num, Num, Num, Num, Flag, Num, Num, Num, Num, Num,
        ],
    },
    CsvSchema {
        name: "weather",
        header: &WEATHER_HEADER,
        cols: &[Timestamp, Num, Num, Num],
    },
    CsvSchema {
        name: "schedule",
        header: &SCHEDULE_HEADER,
        cols: &[Timestamp, Num, Flag, Num],
    },
    CsvSchema {
        name: "tank log",
        header: &TES_LOG_HEADER,
        cols: &[Timestamp, Num, Num, Num, Num, Num, Flag],
    },
    CsvSchema {
        name: "tank daily",
        header: &TES_DAILY_HEADER,
        cols: &[Date, Num, Num, Num, Num, Num, Num, Num, Num, Num, Num, Flag, Flag],
    },
    CsvSchema {
        name: "ground truth",
        header: &TRUTH_HEADER,
        cols: &[Timestamp, Num, Num, Num, Num, Num, Num, Num, Num, Flag, Num],
    },
    CsvSchema {
        name: "season report",
        header: &SEASON_REPORT_HEADER,
        cols: &[Int, Date, Flag, Num, Num, OptNum, OptNum, OptNum, Num, Text],
    },
    CsvSchema {
        name: "season panels",
        header: &PANEL_HEADER,
        cols: &[Int, Date, Num, OptNum, Num, OptNum, Num],
    },
    CsvSchema {
        name: "day trajectory",
        header: &TRAJECTORY_HEADER,
        cols: &[Timestamp, Flag, Num, Num, Num, Num, OptNum, Num, OptNum, Text],
    },
    CsvSchema {
        name: "metric report",
        header: &REPORT_HEADER,
        cols: &[Text, Int, Num, Num, OptNum, Num, Num, Text],
    },
    CsvSchema {
        name: "bland-altman",
        header: &["mean", "difference", "mean_diff", "lower_limit", "upper_limit"],
        cols: &[Num, Num, Num, Num, Num],
    },
    CsvSchema {
        name: "ingest errors",
        header: &["line", "message"],
        cols: &[Int, Text],
    },
    CsvSchema {
        name: "calibration report",
        header: &["model", "quantity", "value"],
        cols: &[Text, Text, Text],
    },
];

fn check_field(col: Col, v: &str) -> bool {
    let v = v.trim();
    match col {
        Timestamp => parse_timestamp(v).is_ok(),
        Date => NaiveDate::parse_from_str(v, "%Y-%m-%d").is_ok(),
        Num => v.parse::<f64>().is_ok_and(f64::is_finite),
        OptNum => v.is_empty() || v.parse::<f64>().is_ok_and(f64::is_finite),
        Flag => v == "0" || v == "1",
        Int => v.parse::<u64>().is_ok(),
        Text => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaCheck {
    pub schema: &'static str,
    pub rows: usize,
}

/// Identify a produced file by its header or store format and verify every
/// row against it.
pub fn cmd_schema_check(path: impl AsRef<Path>) -> Result<SchemaCheck> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "csv" => check_csv(&text),
        "toml" => check_toml(&text),
        _ => check_text_store(&text),
    }
    .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn check_csv(text: &str) -> Result<SchemaCheck> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let schema = CSV_SCHEMAS
        .iter()
        .find(|s| s.header.len() == header.len() && s.header.iter().zip(&header).all(|(a, b)| a == b))
        .ok_or_else(|| Error::Parse(format!("unrecognized header `{}`", header.join(","))))?;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, col) in schema.cols.iter().enumerate() {
            let v = rec.get(c).unwrap_or("");
            if !check_field(*col, v) {
                return Err(Error::Parse(format!(
                    "{} line {}: column `{}` has invalid value `{v}`",
                    schema.name,
                    i + 2,
                    schema.header[c]
                )));
            }
        }
        rows += 1;
    }
    Ok(SchemaCheck {
        schema: schema.name,
        rows,
    })
}

fn check_toml(text: &str) -> Result<SchemaCheck> {
    let one = |schema| Ok(SchemaCheck { schema, rows: 1 });
    if let Ok(m) = toml::from_str::<Manifest>(text) {
        return Ok(SchemaCheck {
            schema: "manifest",
            rows: m.files.len(),
        });
    }
    if toml::from_str::<SynthConfig>(text).is_ok() {
        return one("synthetic config");
    }
    if rcload::from_toml(text).is_ok() {
        return one("load model store");
    }
    if toml::from_str::<TesStore>(text).is_ok() {
        return one("tank curve store");
    }
    if RunConfig::from_toml(text).is_ok() {
        return one("run config");
    }
    Err(Error::Parse("not a recognized TOML document".into()))
}

fn check_text_store(text: &str) -> Result<SchemaCheck> {
    let one = |schema| Ok(SchemaCheck { schema, rows: 1 });
    if CoilModel::from_text(text).is_ok() {
        return one("coil model store");
    }
    if HumidityEnsemble::from_text(text).is_ok() {
        return one("humidity model store");
    }
    if GbtModel::from_text(text).is_ok() {
        return one("boosted tree store");
    }
    Err(Error::Parse("not a recognized model store".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("tolerance = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("tolerance"), "{err}");
        assert!(RunConfig::from_toml("timestep_s = 60.0\n").is_err());
        assert!(RunConfig::from_toml("baseline_degc = 20.0\n").is_err());
    }

    #[test]
    fn forecast_alignment_detects_gaps() {
        let t0 = parse_timestamp("2024-07-01 00:00").unwrap();
        let w: Vec<WeatherRecord> = (0..STEPS_PER_DAY)
            .map(|k| WeatherRecord {
                timestamp: t0 + chrono::Duration::minutes(5 * k as i64),
                t_oa: 25.0,
                rh_oa: 60.0,
                q_sol: 0.0,
            })
            .collect();
        let s: Vec<ScheduleRecord> = w
            .iter()
            .map(|w| ScheduleRecord {
                timestamp: w.timestamp,
                t_set: 24.0,
                ahu_on: false,
                q_int: 0.0,
            })
            .collect();
        assert_eq!(forecasts(&w, &s).unwrap().len(), STEPS_PER_DAY);
        let mut gap = w.clone();
        gap[10].timestamp += chrono::Duration::minutes(1);
        assert!(forecasts(&gap, &s).is_err());
        assert!(forecasts(&w[1..], &s[1..]).is_err());
    }

    #[test]
    fn schema_check_flags_bad_values() {
        let good = "line,message\n3,bad value\n";
        assert_eq!(check_csv(good).unwrap().schema, "ingest errors");
        assert!(check_csv("line,message\nx,bad\n").is_err());
        assert!(check_csv("a,b\n1,2\n").is_err());
    }
}
