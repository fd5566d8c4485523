//! Cooling-coil model: ε-NTU physics plus a learned effectiveness residual.
//!
//! The air stream is the capacity-limiting side and the chilled water is
//! treated as an unmixed stream of unbounded capacity, so
//!
//! ```text
//! ε   = 1 − exp(−NTU),   NTU = UA_ref / C_air · (ṁ / ṁ_ref)^0.8
//! UA  = −ln(1 − ε) · C_air,   C_air = ṁ · cp(w_return)
//! Q   = ε · ṁ · (h(T_ra, RH_ra) − h_sat(T_w,in))
//! ```
//!
//! Measured effectiveness comes from the sensible air-side heat balance
//! divided by the sensible heat ratio. [`limit_temperature`] inverts the
//! forward model by bisection for the warmest water that still meets a load.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::psychro::{self, MoistAirState};
use crate::regressor::{self, GbtHyperparams, GbtModel};

/// Valve position at or above which a record counts as rated operation (%).
pub const RATED_VALVE_PCT: f64 = 95.0;
pub const MIN_UA_RECORDS: usize = 10;
pub const EPS_MIN: f64 = 0.01;
pub const EPS_MAX: f64 = 0.99;
/// Effectiveness values in (1, EPS_BAND_MAX] are treated as sensor noise.
pub const EPS_BAND_MAX: f64 = 1.05;
pub const LIMIT_LOWER_DEGC: f64 = 1.0;
pub const LIMIT_UPPER_MARGIN_DEGC: f64 = 0.1;
/// Bisection stops once the bracket is narrower than this (°C).
pub const LIMIT_TOLERANCE_DEGC: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilRecord {
    pub t_ra: f64,
    pub t_sa: f64,
    pub rh_ra: f64,
    pub t_w_in: f64,
    /// %
    pub valve: f64,
    pub fan_on: bool,
    /// kg/s
    pub airflow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoilModel {
    /// kW/K
    pub ua_ref: f64,
    /// kg/s
    pub airflow_ref: f64,
    pub shr: f64,
    pub ntu_exponent: f64,
    pub residual: Option<GbtModel>,
}

/// Rated airflow: 32,820 m³/h at 1.2 kg/m³.
pub const RATED_AIRFLOW_KG_S: f64 = 32_820.0 * crate::AIR_DENSITY / 3600.0;
pub const DEFAULT_SHR: f64 = 0.8;

impl CoilModel {
    pub fn physics_only(ua_ref: f64) -> Self {
        Self {
            ua_ref,
            airflow_ref: RATED_AIRFLOW_KG_S,
            shr: DEFAULT_SHR,
            ntu_exponent: 0.8,
            residual: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ua_ref > 0.0 && self.ua_ref.is_finite()) {
            return Err(Error::invalid("ua_ref must be positive"));
        }
        if !(self.airflow_ref > 0.0) {
            return Err(Error::invalid("airflow_ref must be positive"));
        }
        if !(self.shr > 0.0 && self.shr <= 1.0) {
            return Err(Error::invalid("SHR must lie in (0, 1]"));
        }
        Ok(())
    }

    /// ε from the flow-scaled NTU. `c_air` is the air capacity rate (kW/K).
    pub fn physics_effectiveness(&self, airflow: f64, c_air: f64) -> f64 {
        let ntu = self.ua_ref / c_air * (airflow / self.airflow_ref).powf(self.ntu_exponent);
        1.0 - (-ntu).exp()
    }
}

/// Air capacity rate (kW/K) with moist-air cp at return conditions.
pub fn air_capacity_rate(airflow: f64, t_ra: f64, rh_ra: f64) -> Result<f64> {
    let w = psychro::humidity_ratio(&MoistAirState::new(t_ra, rh_ra)?)?;
    Ok(airflow * psychro::moist_air_cp(w))
}

/// Total coil load implied by a sensible air-side temperature drop (kW).
pub fn sensible_estimate(airflow: f64, cp: f64, t_ra: f64, t_sa: f64, shr: f64) -> f64 {
    airflow * cp * (t_ra - t_sa) / shr
}

/// Rated-operation filter: fan on, valve at least 95 % and
/// `t_w_in < t_sa < t_ra`.
pub fn filter_rated(records: &[CoilRecord]) -> Vec<CoilRecord> {
    records
        .iter()
        .filter(|r| r.fan_on && r.valve >= RATED_VALVE_PCT && r.t_w_in < r.t_sa && r.t_sa < r.t_ra)
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectivenessFlag {
    /// No sensible temperature drop.
    NonCooling,
    /// Water enthalpy potential not below the return air.
    NoDrivingPotential,
    OutOfBand(f64),
    InvalidState,
}

impl fmt::Display for EffectivenessFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonCooling => write!(f, "non-cooling"),
            Self::NoDrivingPotential => write!(f, "no-driving-potential"),
            Self::OutOfBand(e) => write!(f, "out-of-band({e:.4})"),
            Self::InvalidState => write!(f, "invalid-state"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredEffectiveness {
    pub eps: f64,
    /// kW
    pub q_est: f64,
    /// kW
    pub q_max: f64,
    /// kW/K
    pub c_air: f64,
}

pub fn measured_effectiveness(rec: &CoilRecord, shr: f64) -> Result<MeasuredEffectiveness, EffectivenessFlag> {
    let state = MoistAirState::new(rec.t_ra, rec.rh_ra).map_err(|_| EffectivenessFlag::InvalidState)?;
    let w = psychro::humidity_ratio(&state).map_err(|_| EffectivenessFlag::InvalidState)?;
    let cp = psychro::moist_air_cp(w);
    let h_ra = psychro::enthalpy_from_ratio(rec.t_ra, w);
    let h_w = psychro::saturated_surface_enthalpy(rec.t_w_in).map_err(|_| EffectivenessFlag::InvalidState)?;
    let q_est = sensible_estimate(rec.airflow, cp, rec.t_ra, rec.t_sa, shr);
    let q_max = rec.airflow * (h_ra - h_w);
    if q_est <= 0.0 {
        return Err(EffectivenessFlag::NonCooling);
    }
    if !(q_max > 0.0) {
        return Err(EffectivenessFlag::NoDrivingPotential);
    }
    let eps = q_est / q_max;
    if !(eps > 0.0 && eps <= EPS_BAND_MAX) {
        return Err(EffectivenessFlag::OutOfBand(eps));
    }
    Ok(MeasuredEffectiveness {
        eps,
        q_est,
        q_max,
        c_air: rec.airflow * cp,
    })
}

/// UA (kW/K) implied by an effectiveness on a stream of capacity `c_air`.
pub fn ua_from_effectiveness(eps: f64, c_air: f64) -> f64 {
    let e = if eps > 1.0 { 0.999 } else { eps };
    -(1.0 - e).ln() * c_air
}

#[derive(Debug, Clone, PartialEq)]
pub struct UaIdentification {
    pub ua_ref: f64,
    pub per_record: Vec<f64>,
    pub flagged: usize,
}

/// Median of the per-record UA values over the usable rated records.
pub fn identify_ua_ref(filtered: &[CoilRecord], shr: f64) -> Result<UaIdentification> {
    let mut flagged = 0;
    let mut per_record = Vec::new();
    for rec in filtered {
        match measured_effectiveness(rec, shr) {
            Ok(m) => per_record.push(ua_from_effectiveness(m.eps, m.c_air)),
            Err(_) => flagged += 1,
        }
    }
    if per_record.len() < MIN_UA_RECORDS {
        return Err(Error::InsufficientData {
            model: "coil UA identification",
            required: MIN_UA_RECORDS,
            actual: per_record.len(),
        });
    }
    let mut sorted = per_record.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let ua_ref = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(UaIdentification {
        ua_ref,
        per_record,
        flagged,
    })
}

/// Residual training rows: features `(t_ra, rh_ra, t_w_in, ε_physics)` and
/// target `ε_mea − ε_physics`, for every unflagged record.
pub fn residual_rows(filtered: &[CoilRecord], model: &CoilModel) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in filtered {
        if let Ok(m) = measured_effectiveness(rec, model.shr) {
            let eps_phys = model.physics_effectiveness(rec.airflow, m.c_air);
            xs.push(vec![rec.t_ra, rec.rh_ra, rec.t_w_in, eps_phys]);
            ys.push(m.eps.min(0.999) - eps_phys);
        }
    }
    (xs, ys)
}

pub fn train_residual(filtered: &[CoilRecord], model: &CoilModel, seed: u64) -> Result<CoilModel> {
    model.validate()?;
    if filtered.is_empty() {
        return Err(Error::InsufficientData {
            model: "coil residual",
            required: 2,
            actual: 0,
        });
    }
    let (xs, ys) = residual_rows(filtered, model);
    let residual = regressor::fit(&xs, &ys, GbtHyperparams::coil_residual(), seed)?;
    Ok(CoilModel {
        residual: Some(residual),
        ..model.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Performance {
    pub eps: f64,
    /// kW
    pub q: f64,
    pub t_sa: f64,
}

pub fn predict_performance(model: &CoilModel, t_ra: f64, rh_ra: f64, t_w_in: f64, airflow: f64) -> Result<Performance> {
    if !(t_w_in < t_ra) {
        return Err(Error::domain(format!(
            "chilled water {t_w_in} °C must be colder than return air {t_ra} °C"
        )));
    }
    if !(airflow > 0.0) {
        return Err(Error::invalid("airflow must be positive"));
    }
    let w = psychro::humidity_ratio(&MoistAirState::new(t_ra, rh_ra)?)?;
    let cp = psychro::moist_air_cp(w);
    let c_air = airflow * cp;
    let eps_phys = model.physics_effectiveness(airflow, c_air);
    let correction = match &model.residual {
        Some(r) => r.predict(&[t_ra, rh_ra, t_w_in, eps_phys])?,
        None => 0.0,
    };
    let eps = (eps_phys + correction).clamp(EPS_MIN, EPS_MAX);
    let dh = psychro::enthalpy_from_ratio(t_ra, w) - psychro::saturated_surface_enthalpy(t_w_in)?;
    let q = (eps * airflow * dh).max(0.0);
    let t_sa = (t_ra - model.shr * q / c_air).max(t_w_in);
    Ok(Performance { eps, q, t_sa })
}

/// Warmest chilled-water inlet temperature whose predicted capacity still
/// covers `q_req` (kW).
pub fn limit_temperature(model: &CoilModel, q_req: f64, t_ra: f64, rh_ra: f64, airflow: f64) -> Result<f64> {
    if !(q_req >= 0.0 && q_req.is_finite()) {
        return Err(Error::invalid(format!("required load {q_req} kW must be >= 0")));
    }
    let upper = t_ra - LIMIT_UPPER_MARGIN_DEGC;
    if upper <= LIMIT_LOWER_DEGC {
        return Err(Error::domain(format!("return air {t_ra} °C leaves no search interval")));
    }
    let q_at = |t_w: f64| predict_performance(model, t_ra, rh_ra, t_w, airflow).map(|p| p.q);
    if q_at(upper)? >= q_req {
        return Ok(upper);
    }
    let capacity = q_at(LIMIT_LOWER_DEGC)?;
    if capacity < q_req {
        return Err(Error::InfeasibleLoad {
            required_kw: q_req,
            capacity_kw: capacity,
        });
    }
    // invariant: q(lo) >= q_req > q(hi)
    let (mut lo, mut hi) = (LIMIT_LOWER_DEGC, upper);
    while hi - lo > LIMIT_TOLERANCE_DEGC {
        let mid = 0.5 * (lo + hi);
        if q_at(mid)? >= q_req {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

const MAGIC: &str = "coil-model v1";

impl CoilModel {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MAGIC}\nua_ref_kw_per_k {}\nairflow_ref_kg_s {}\nshr {}\nntu_exponent {}\n",
            self.ua_ref, self.airflow_ref, self.shr, self.ntu_exponent
        );
        match &self.residual {
            Some(r) => {
                s.push_str("residual gbt\n");
                s.push_str(&r.to_text());
            }
            None => s.push_str("residual none\n"),
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::ModelStore(format!("coil store truncated before `{key}`")))?;
            if key == MAGIC {
                return if line.trim() == MAGIC {
                    Ok(String::new())
                } else {
                    Err(Error::ModelStore("not a coil model store".into()))
                };
            }
            match line.trim().split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(Error::ModelStore(format!("expected `{key}`, found `{line}`"))),
            }
        };
        next(MAGIC)?;
        let num = |v: String| {
            v.parse::<f64>()
                .map_err(|_| Error::ModelStore(format!("bad number `{v}`")))
        };
        let ua_ref = num(next("ua_ref_kw_per_k")?)?;
        let airflow_ref = num(next("airflow_ref_kg_s")?)?;
        let shr = num(next("shr")?)?;
        let ntu_exponent = num(next("ntu_exponent")?)?;
        let residual = match next("residual")?.as_str() {
            "none" => None,
            "gbt" => {
                let rest: Vec<&str> = lines.collect();
                Some(GbtModel::from_text(&rest.join("\n"))?)
            }
            other => return Err(Error::ModelStore(format!("unknown residual kind `{other}`"))),
        };
        let model = CoilModel {
            ua_ref,
            airflow_ref,
            shr,
            ntu_exponent,
            residual,
        };
        model.validate().map_err(|e| Error::ModelStore(e.to_string()))?;
        Ok(model)
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

/// Diagnostics CSV: one row per record with measured and modeled ε.
pub fn write_audit<W: Write>(w: W, records: &[CoilRecord], model: &CoilModel) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "t_ra_degc",
        "t_sa_degc",
        "rh_ra_pct",
        "t_w_in_degc",
        "valve_pct",
        "eps_measured",
        "eps_physics",
        "residual",
        "flag",
    ])?;
    for r in records {
        let (eps_mea, eps_phys, flag) = match measured_effectiveness(r, model.shr) {
            Ok(m) => (
                format!("{:.5}", m.eps),
                format!("{:.5}", model.physics_effectiveness(r.airflow, m.c_air)),
                String::new(),
            ),
            Err(f) => (String::new(), String::new(), f.to_string()),
        };
        let residual = match (&model.residual, eps_phys.parse::<f64>()) {
            (Some(g), Ok(e)) => format!("{:.5}", g.predict(&[r.t_ra, r.rh_ra, r.t_w_in, e])?),
            _ => String::new(),
        };
        out.write_record([
            format!("{:.2}", r.t_ra),
            format!("{:.2}", r.t_sa),
            format!("{:.1}", r.rh_ra),
            format!("{:.2}", r.t_w_in),
            format!("{:.1}", r.valve),
            eps_mea,
            eps_phys,
            residual,
            flag,
        ])?;
    }
    out.flush()?;
    Ok(())
}
