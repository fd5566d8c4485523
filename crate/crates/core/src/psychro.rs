//! Moist-air psychrometrics.
//!
//! Two saturation-pressure parameterizations are kept side by side on purpose:
//! the dew point uses the Magnus–Tetens pair (17.27, 237.7) while the
//! saturation vapor pressure uses 6.12·exp(17.67·T/(T + 243.5)). Each function
//! uses the constants of its own formula.
//!
//! Units: temperatures in °C, relative humidity in %, vapor pressures in hPa,
//! atmospheric pressure in kPa, enthalpy in kJ/kg dry air.

use crate::error::{Error, Result};

/// Standard sea-level atmospheric pressure (kPa).
pub const P_ATM_STD: f64 = 101.325;

/// Ratio of molar masses of water vapor and dry air.
const EPSILON_W: f64 = 0.622;

/// Fixed psychrometric constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsychroConstants {
    /// Magnus–Tetens `a` for the dew point.
    pub a_magnus: f64,
    /// Magnus–Tetens `b` for the dew point (°C).
    pub b_magnus: f64,
    /// Saturation pressure prefactor (hPa).
    pub es_coeff: f64,
    pub es_a: f64,
    /// °C
    pub es_b: f64,
}

pub const CONSTANTS: PsychroConstants = PsychroConstants {
    a_magnus: 17.27,
    b_magnus: 237.7,
    es_coeff: 6.12,
    es_a: 17.67,
    es_b: 243.5,
};

/// Dry-bulb temperature and relative humidity of an air stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoistAirState {
    t_db: f64,
    rh: f64,
    p_atm: f64,
}

impl MoistAirState {
    /// State at standard pressure.
    pub fn new(t_db: f64, rh: f64) -> Result<Self> {
        Self::with_pressure(t_db, rh, P_ATM_STD)
    }

    pub fn with_pressure(t_db: f64, rh: f64, p_atm: f64) -> Result<Self> {
        if !t_db.is_finite() || t_db <= -40.0 || t_db >= 60.0 {
            return Err(Error::domain(format!(
                "dry-bulb temperature {t_db} °C outside (-40, 60)"
            )));
        }
        if !rh.is_finite() || !(0.0..=100.0).contains(&rh) {
            return Err(Error::domain(format!("relative humidity {rh} % outside [0, 100]")));
        }
        if !p_atm.is_finite() || p_atm <= 0.0 {
            return Err(Error::domain(format!("atmospheric pressure {p_atm} kPa must be > 0")));
        }
        Ok(Self { t_db, rh, p_atm })
    }

    pub fn t_db(&self) -> f64 {
        self.t_db
    }

    pub fn rh(&self) -> f64 {
        self.rh
    }

    pub fn p_atm(&self) -> f64 {
        self.p_atm
    }
}

/// Saturation vapor pressure (hPa) at `t_db` (°C).
pub fn saturation_vapor_pressure(t_db: f64) -> Result<f64> {
    let c = CONSTANTS;
    if !t_db.is_finite() || t_db <= -c.es_b {
        return Err(Error::domain(format!(
            "saturation pressure undefined at {t_db} °C (must exceed {} °C)",
            -c.es_b
        )));
    }
    Ok(c.es_coeff * (c.es_a * t_db / (t_db + c.es_b)).exp())
}

/// Actual vapor pressure (hPa).
pub fn vapor_pressure(state: &MoistAirState) -> f64 {
    // a valid state always has t_db > -40 > -243.5
    let es = saturation_vapor_pressure(state.t_db).expect("validated state");
    state.rh / 100.0 * es
}

/// Dew-point temperature (°C) by Magnus–Tetens.
pub fn dew_point(state: &MoistAirState) -> Result<f64> {
    if state.rh <= 0.0 {
        return Err(Error::domain("dew point undefined for 0 % relative humidity"));
    }
    let (a, b) = (CONSTANTS.a_magnus, CONSTANTS.b_magnus);
    let gamma = a * state.t_db / (b + state.t_db) + (state.rh / 100.0).ln();
    Ok(b * gamma / (a - gamma))
}

/// Absolute humidity (g/m³): 217·e/T with e in hPa and T in kelvin.
pub fn absolute_humidity(state: &MoistAirState) -> f64 {
    217.0 * vapor_pressure(state) / (state.t_db + 273.15)
}

/// Humidity ratio (kg water / kg dry air).
pub fn humidity_ratio(state: &MoistAirState) -> Result<f64> {
    let e_kpa = vapor_pressure(state) / 10.0;
    if e_kpa >= state.p_atm {
        return Err(Error::domain(format!(
            "vapor pressure {e_kpa} kPa reaches atmospheric pressure {} kPa",
            state.p_atm
        )));
    }
    Ok(EPSILON_W * e_kpa / (state.p_atm - e_kpa))
}

/// Enthalpy (kJ/kg dry air) from temperature and humidity ratio.
pub fn enthalpy_from_ratio(t_db: f64, w: f64) -> f64 {
    1.006 * t_db + w * (2501.0 + 1.86 * t_db)
}

/// Moist-air enthalpy (kJ/kg dry air), 0 at 0 °C dry air.
pub fn moist_air_enthalpy(state: &MoistAirState) -> Result<f64> {
    let w = humidity_ratio(state)?;
    Ok(enthalpy_from_ratio(state.t_db, w))
}

/// Enthalpy of saturated air at the water temperature `t_w` (°C).
pub fn saturated_surface_enthalpy(t_w: f64) -> Result<f64> {
    moist_air_enthalpy(&MoistAirState::new(t_w, 100.0)?)
}

/// Moist-air specific heat (kJ/kg·K) for a humidity ratio.
pub fn moist_air_cp(w: f64) -> f64 {
    1.006 + 1.86 * w
}

/// Relative humidity (%) at `t_db` holding humidity ratio `w` at standard pressure,
/// capped at saturation.
pub fn rh_from_ratio(t_db: f64, w: f64) -> Result<f64> {
    let es_kpa = saturation_vapor_pressure(t_db)? / 10.0;
    let e_kpa = w * P_ATM_STD / (EPSILON_W + w);
    Ok((100.0 * e_kpa / es_kpa).clamp(0.0, 100.0))
}
