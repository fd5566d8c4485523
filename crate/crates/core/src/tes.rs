//! Chilled-water storage discharge model.
//!
//! The tank is a single-state system: its mean temperature rises as cooling
//! is discharged,
//!
//! ```text
//! t_avg(k+1) = t_avg(k) + q_load(k)·Δt / (M·cp)
//! ```
//!
//! (a cooling store warms when it is discharged). Outlet temperatures come
//! from two fitted characteristic curves: a cubic in `t_avg` at the peak-load
//! step, and an end-of-operation regression in `t_avg`, the temperature rise
//! `ΔT = t_avg − t_init` and the load rate `LR = q_cum / elapsed`:
//!
//! ```text
//! t_out,peak = a·t³ + b·t² + c·t + d
//! t_out,end  = a·t² + b·t + c·ΔT + d·LR + e·ΔT·LR + f
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Water density used to derive the tank mass from its volume (kg/m³).
pub const WATER_DENSITY: f64 = 997.0;

/// Top-to-bottom temperature difference at or below which stratification
/// counts as collapsed (°C).
pub const COLLAPSE_DELTA_T: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TesConfig {
    pub volume_m3: f64,
    pub mass_kg: f64,
    /// kJ/kg·K
    pub cp_water: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_discharge_limit: f64,
}

impl Default for TesConfig {
    /// 273 m³ tank charged between 5 and 13 °C, discharge limit 17 °C.
    fn default() -> Self {
        Self {
            volume_m3: 273.0,
            mass_kg: 273.0 * WATER_DENSITY,
            cp_water: 4.186,
            t_min: 5.0,
            t_max: 13.0,
            t_discharge_limit: 17.0,
        }
    }
}

impl TesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0 && self.cp_water > 0.0 && self.volume_m3 > 0.0) {
            return Err(Error::invalid("tank volume, mass and cp must be positive"));
        }
        if !(self.t_min < self.t_max && self.t_max < self.t_discharge_limit) {
            return Err(Error::invalid(
                "tank temperatures must satisfy t_min < t_max < t_discharge_limit",
            ));
        }
        Ok(())
    }

    /// Heat capacity of the tank (kJ/K).
    pub fn heat_capacity(&self) -> f64 {
        self.mass_kg * self.cp_water
    }

    /// Energy (kWh) that raises the mean temperature by one kelvin.
    pub fn kwh_per_kelvin(&self) -> f64 {
        self.heat_capacity() / 3600.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesState {
    pub t_avg: f64,
    pub t_init: f64,
    /// Cumulative discharged energy (kWh).
    pub q_cum: f64,
    /// Operating time (h).
    pub elapsed: f64,
}

impl TesState {
    pub fn charged(t_init: f64) -> Self {
        Self {
            t_avg: t_init,
            t_init,
            q_cum: 0.0,
            elapsed: 0.0,
        }
    }

    pub fn delta_t(&self) -> f64 {
        self.t_avg - self.t_init
    }

    /// Load rate (kW) = q_cum / elapsed.
    pub fn load_rate(&self) -> Result<f64> {
        if self.elapsed <= 0.0 {
            return Err(Error::domain("load rate undefined before any operating time"));
        }
        Ok(self.q_cum / self.elapsed)
    }
}

/// Advance the tank by one step of `q_load` kW over `dt` seconds.
pub fn step(state: &TesState, q_load: f64, dt: f64, cfg: &TesConfig) -> Result<TesState> {
    if !(q_load >= 0.0 && q_load.is_finite()) {
        return Err(Error::invalid(format!("discharge load {q_load} kW must be >= 0")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("timestep {dt} s must be > 0")));
    }
    Ok(TesState {
        t_avg: state.t_avg + q_load * dt / cfg.heat_capacity(),
        t_init: state.t_init,
        q_cum: state.q_cum + q_load * dt / 3600.0,
        elapsed: state.elapsed + dt / 3600.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesCurves {
    /// (a, b, c, d) of the peak-step cubic.
    pub peak: [f64; 4],
    /// (a, b, c, d, e, f) of the end-of-operation regression.
    pub end: [f64; 6],
}

impl TesCurves {
    /// Outlet equals the mean temperature at both checkpoints.
    pub fn identity() -> Self {
        Self {
            peak: [0.0, 0.0, 1.0, 0.0],
            end: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    /// Coefficients fitted to the bundled synthetic tank surrogate (default
    /// synthetic season, seed 2024). They describe that surrogate only and
    /// carry no information about any real tank.
    pub fn synthetic_default() -> Self {
        Self {
            peak: [0.010_413, -0.288_43, 2.681_2, -1.411_4],
            end: [0.254_94, -4.548_9, -0.921_23, 0.004_138_9, -0.000_888_55, 29.492],
        }
    }

    pub fn peak_raw(&self, t_avg: f64) -> f64 {
        let [a, b, c, d] = self.peak;
        ((a * t_avg + b) * t_avg + c) * t_avg + d
    }

    pub fn peak_slope(&self, t_avg: f64) -> f64 {
        let [a, b, c, _] = self.peak;
        (3.0 * a * t_avg + 2.0 * b) * t_avg + c
    }

    pub fn end_raw(&self, t_avg: f64, delta_t: f64, load_rate: f64) -> f64 {
        let [a, b, c, d, e, f] = self.end;
        a * t_avg * t_avg + b * t_avg + c * delta_t + d * load_rate + e * delta_t * load_rate + f
    }

    /// Whether the peak curve is non-decreasing on `[lo, hi]` (sampled).
    pub fn peak_is_monotone(&self, lo: f64, hi: f64) -> bool {
        (0..=120).all(|i| self.peak_slope(lo + (hi - lo) * i as f64 / 120.0) >= -1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutletEstimate {
    pub value: f64,
    /// `t_avg` was more than 1 °C outside the fitted domain.
    pub extrapolated: bool,
}

/// Outlet temperature at the peak-load step, clamped to
/// `[t_init − 0.5, t_discharge_limit + 2]`.
pub fn peak_outlet(t_avg: f64, t_init: f64, curves: &TesCurves, cfg: &TesConfig) -> OutletEstimate {
    let extrapolated = t_avg < cfg.t_min - 1.0 || t_avg > cfg.t_discharge_limit + 1.0;
    let lo = t_init - 0.5;
    let hi = cfg.t_discharge_limit + 2.0;
    OutletEstimate {
        value: curves.peak_raw(t_avg).clamp(lo, hi.max(lo)),
        extrapolated,
    }
}

/// Outlet temperature at the end of operation.
pub fn end_outlet(state: &TesState, curves: &TesCurves) -> Result<f64> {
    let lr = state.load_rate()?;
    Ok(curves.end_raw(state.t_avg, state.delta_t(), lr))
}

pub fn stratification_collapsed(t_top: f64, t_bottom: f64) -> bool {
    t_top - t_bottom <= COLLAPSE_DELTA_T
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discharge {
    /// Mean temperature after each step.
    pub t_avg: Vec<f64>,
    /// First index of the maximum load.
    pub peak_index: usize,
    pub t_out_peak: f64,
    pub t_out_end: f64,
    pub final_state: TesState,
    pub extrapolated: bool,
}

/// Discharge a tank charged to `t_charge` through `load_kw` (one value per
/// `dt`-second step of the operating window).
pub fn simulate_discharge(
    t_charge: f64,
    load_kw: &[f64],
    dt: f64,
    cfg: &TesConfig,
    curves: &TesCurves,
) -> Result<Discharge> {
    if load_kw.is_empty() {
        return Err(Error::invalid("discharge load profile is empty"));
    }
    if !(cfg.t_min..=cfg.t_max).contains(&t_charge) {
        return Err(Error::invalid(format!(
            "charging temperature {t_charge} °C outside [{}, {}]",
            cfg.t_min, cfg.t_max
        )));
    }
    let mut state = TesState::charged(t_charge);
    let mut t_avg = Vec::with_capacity(load_kw.len());
    let mut peak_index = 0;
    for (k, &q) in load_kw.iter().enumerate() {
        state = step(&state, q, dt, cfg)?;
        t_avg.push(state.t_avg);
        if q > load_kw[peak_index] {
            peak_index = k;
        }
    }
    let peak = peak_outlet(t_avg[peak_index], t_charge, curves, cfg);
    let t_out_end = end_outlet(&state, curves)?;
    Ok(Discharge {
        t_avg,
        peak_index,
        t_out_peak: peak.value,
        t_out_end,
        final_state: state,
        extrapolated: peak.extrapolated,
    })
}

/// One day of observed discharge behaviour used to fit the curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesDayObservation {
    pub t_init: f64,
    pub t_avg_peak: f64,
    pub t_out_peak: f64,
    pub t_avg_end: f64,
    /// kWh
    pub q_cum: f64,
    /// h
    pub elapsed: f64,
    pub t_out_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveDiagnostics {
    pub n: usize,
    pub r2: f64,
    pub residual_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesFit {
    pub curves: TesCurves,
    pub peak: CurveDiagnostics,
    pub end: CurveDiagnostics,
    /// Peak curve non-decreasing over `[t_min, t_discharge_limit]`.
    pub peak_monotone: bool,
}

pub const MIN_PEAK_POINTS: usize = 8;
pub const MIN_END_DAYS: usize = 15;

/// Ordinary least squares fit of both characteristic curves.
pub fn fit_curves(history: &[TesDayObservation], cfg: &TesConfig) -> Result<TesFit> {
    for (i, h) in history.iter().enumerate() {
        let vals = [
            h.t_init,
            h.t_avg_peak,
            h.t_out_peak,
            h.t_avg_end,
            h.q_cum,
            h.elapsed,
            h.t_out_end,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("observation {i} has non-finite values")));
        }
        if h.elapsed <= 0.0 {
            return Err(Error::invalid(format!("observation {i} has no operating time")));
        }
    }

    let peak_rows: Vec<Vec<f64>> = history
        .iter()
        .map(|h| vec![h.t_avg_peak.powi(3), h.t_avg_peak.powi(2), h.t_avg_peak, 1.0])
        .collect();
    let peak_y: Vec<f64> = history.iter().map(|h| h.t_out_peak).collect();
    let end_rows: Vec<Vec<f64>> = history
        .iter()
        .map(|h| {
            let dt = h.t_avg_end - h.t_init;
            let lr = h.q_cum / h.elapsed;
            vec![h.t_avg_end.powi(2), h.t_avg_end, dt, lr, dt * lr, 1.0]
        })
        .collect();
    let end_y: Vec<f64> = history.iter().map(|h| h.t_out_end).collect();

    if history.len() < 6 {
        return Err(Error::RankDeficient(format!(
            "{} observations cannot determine 6 end-of-operation coefficients",
            history.len()
        )));
    }
    if history.len() < MIN_PEAK_POINTS {
        return Err(Error::InsufficientData {
            model: "tes peak curve",
            required: MIN_PEAK_POINTS,
            actual: history.len(),
        });
    }
    if history.len() < MIN_END_DAYS {
        return Err(Error::InsufficientData {
            model: "tes end-of-operation curve",
            required: MIN_END_DAYS,
            actual: history.len(),
        });
    }

    let (peak, peak_diag) = least_squares(&peak_rows, &peak_y, "peak cubic")?;
    let (end, end_diag) = least_squares(&end_rows, &end_y, "end-of-operation regression")?;
    let curves = TesCurves {
        peak: [peak[0], peak[1], peak[2], peak[3]],
        end: [end[0], end[1], end[2], end[3], end[4], end[5]],
    };
    Ok(TesFit {
        curves,
        peak: peak_diag,
        end: end_diag,
        peak_monotone: curves.peak_is_monotone(cfg.t_min, cfg.t_discharge_limit),
    })
}

fn least_squares(rows: &[Vec<f64>], y: &[f64], what: &str) -> Result<(Vec<f64>, CurveDiagnostics)> {
    let n = rows.len();
    let p = rows[0].len();
    // columns scaled to unit norm to keep the SVD well conditioned
    let scales: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    if scales.contains(&0.0) {
        return Err(Error::RankDeficient(format!(
            "{what}: a regressor column is identically zero"
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j] / scales[j]);
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "{what}: design matrix is singular (condition {:.3e})",
            smax / smin
        )));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, 0.0)
        .map_err(|e| Error::RankDeficient(format!("{what}: {e}")))?;
    let coeffs: Vec<f64> = beta.iter().zip(&scales).map(|(b, s)| b / s).collect();

    let fitted = &x * &beta;
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    let rmean = resid.iter().sum::<f64>() / n as f64;
    let residual_std = (resid.iter().map(|r| (r - rmean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((coeffs, CurveDiagnostics { n, r2, residual_std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg_example() -> TesConfig {
        TesConfig {
            mass_kg: 273_000.0,
            ..TesConfig::default()
        }
    }

    #[test]
    fn step_examples() {
        let cfg = cfg_example();
        let s = TesState::charged(7.0);
        assert_eq!(step(&s, 0.0, 300.0, &cfg).unwrap().t_avg, 7.0);
        let one_hour = step(&s, 2286.0, 3600.0, &cfg).unwrap();
        // 2286·3600 / (273000·4.186) = 7.2016...
        assert_relative_eq!(
            one_hour.t_avg - 7.0,
            2286.0 * 3600.0 / (273_000.0 * 4.186),
            max_relative = 1e-12
        );
        assert!((one_hour.t_avg - 7.0 - 7.20).abs() < 0.005);
        let half = step(&step(&s, 500.0, 150.0, &cfg).unwrap(), 500.0, 150.0, &cfg).unwrap();
        let full = step(&s, 500.0, 300.0, &cfg).unwrap();
        assert!((half.t_avg - full.t_avg).abs() < 1e-12);
        assert!((half.q_cum - full.q_cum).abs() < 1e-12);
        assert!(step(&s, -1.0, 300.0, &cfg).is_err());
        assert!(step(&s, 1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn peak_outlet_examples() {
        let cfg = TesConfig::default();
        let id = TesCurves::identity();
        assert_eq!(peak_outlet(9.3, 7.0, &id, &cfg).value, 9.3);
        assert!(!peak_outlet(9.3, 7.0, &id, &cfg).extrapolated);
        assert!(peak_outlet(cfg.t_discharge_limit + 2.0, 7.0, &id, &cfg).extrapolated);
        assert!(peak_outlet(cfg.t_min - 1.5, 7.0, &id, &cfg).extrapolated);
        // clamps
        assert_eq!(peak_outlet(3.0, 7.0, &id, &cfg).value, 6.5);
        assert_eq!(peak_outlet(30.0, 7.0, &id, &cfg).value, 19.0);
    }

    #[test]
    fn end_outlet_examples() {
        let curves = TesCurves {
            peak: [0.0; 4],
            end: [0.05, 0.4, 0.9, 0.002, 0.0003, 1.5],
        };
        let zero = TesState {
            t_avg: 8.0,
            t_init: 8.0,
            q_cum: 0.0,
            elapsed: 10.0,
        };
        assert_eq!(end_outlet(&zero, &curves).unwrap(), 0.05 * 64.0 + 0.4 * 8.0 + 1.5);
        let s = TesState {
            t_avg: 14.0,
            t_init: 8.0,
            q_cum: 1900.0,
            elapsed: 10.0,
        };
        let lr = 190.0;
        let expected = 0.05 * 196.0 + 0.4 * 14.0 + 0.9 * 6.0 + 0.002 * lr + 0.0003 * 6.0 * lr + 1.5;
        assert_relative_eq!(end_outlet(&s, &curves).unwrap(), expected, max_relative = 1e-14);
        let never_ran = TesState::charged(8.0);
        assert!(end_outlet(&never_ran, &curves).is_err());
    }

    #[test]
    fn collapse_threshold_is_inclusive() {
        assert!(stratification_collapsed(9.0, 8.1));
        assert!(stratification_collapsed(15.0, 14.9));
        assert!(stratification_collapsed(9.0, 8.0));
        assert!(!stratification_collapsed(13.0, 6.0));
    }

    #[test]
    fn simulate_discharge_examples() {
        let cfg = TesConfig::default();
        let curves = TesCurves::identity();
        let zero = simulate_discharge(8.0, &[0.0; 120], 300.0, &cfg, &curves).unwrap();
        assert!(zero.t_avg.iter().all(|t| *t == 8.0));
        assert_eq!(zero.t_out_end, 8.0);

        let loads: Vec<f64> = (0..120).map(|k| 200.0 + (k % 13) as f64 * 10.0).collect();
        let d = simulate_discharge(6.0, &loads, 300.0, &cfg, &curves).unwrap();
        let total: f64 = loads.iter().map(|q| q * 300.0).sum();
        assert_relative_eq!(
            d.final_state.t_avg,
            6.0 + total / cfg.heat_capacity(),
            max_relative = 1e-12
        );
        assert_eq!(d.peak_index, 12); // first occurrence of the maximum

        // energy that exactly spends the window up to the discharge limit
        let t0 = 7.0;
        let energy_kj = cfg.heat_capacity() * (cfg.t_discharge_limit - t0);
        let q = energy_kj / (120.0 * 300.0);
        let full = simulate_discharge(t0, &vec![q; 120], 300.0, &cfg, &curves).unwrap();
        assert_relative_eq!(full.final_state.t_avg, cfg.t_discharge_limit, max_relative = 1e-12);

        assert!(simulate_discharge(8.0, &[], 300.0, &cfg, &curves).is_err());
        assert!(simulate_discharge(4.0, &[1.0], 300.0, &cfg, &curves).is_err());
        assert!(simulate_discharge(13.5, &[1.0], 300.0, &cfg, &curves).is_err());
    }

    fn synthetic_history(curves: &TesCurves, n: usize) -> Vec<TesDayObservation> {
        (0..n)
            .map(|i| {
                let t_init = 5.0 + (i * 7 % 9) as f64 * 0.7;
                let q_cum = 800.0 + (i * 13 % 17) as f64 * 120.0;
                let elapsed = 9.0 + (i % 3) as f64;
                let t_avg_end = t_init + q_cum / 317.0;
                let t_avg_peak = t_init + 0.55 * (t_avg_end - t_init) + (i % 4) as f64 * 0.3;
                TesDayObservation {
                    t_init,
                    t_avg_peak,
                    t_out_peak: curves.peak_raw(t_avg_peak),
                    t_avg_end,
                    q_cum,
                    elapsed,
                    t_out_end: curves.end_raw(t_avg_end, t_avg_end - t_init, q_cum / elapsed),
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_noiseless_coefficients() {
        let truth = TesCurves {
            peak: [0.004, -0.12, 1.6, -2.0],
            end: [0.08, -1.2, 0.45, -0.004, 0.0006, 9.4],
        };
        let cfg = TesConfig::default();
        let fit = fit_curves(&synthetic_history(&truth, 40), &cfg).unwrap();
        for (a, b) in fit.curves.peak.iter().zip(truth.peak) {
            assert_relative_eq!(*a, b, max_relative = 1e-6);
        }
        for (a, b) in fit.curves.end.iter().zip(truth.end) {
            assert_relative_eq!(*a, b, max_relative = 1e-6);
        }
        assert!(fit.peak.r2 > 0.999_999 && fit.end.r2 > 0.999_999);
    }

    #[test]
    fn constant_outlet_degenerates_to_intercept() {
        let truth = TesCurves {
            peak: [0.0, 0.0, 0.0, 6.5],
            end: [0.0, 0.0, 0.0, 0.0, 0.0, 6.5],
        };
        let fit = fit_curves(&synthetic_history(&truth, 30), &TesConfig::default()).unwrap();
        let [a, b, c, d] = fit.curves.peak;
        assert!(a.abs() < 1e-8 && b.abs() < 1e-7 && c.abs() < 1e-6);
        assert!((d - 6.5).abs() < 1e-5);
        assert!(fit.peak_monotone);
    }

    #[test]
    fn fit_error_paths() {
        let truth = TesCurves::identity();
        let cfg = TesConfig::default();
        assert!(matches!(
            fit_curves(&synthetic_history(&truth, 3), &cfg),
            Err(Error::RankDeficient(_))
        ));
        assert!(matches!(
            fit_curves(&synthetic_history(&truth, 10), &cfg),
            Err(Error::InsufficientData { .. })
        ));
        // identical days: collinear design
        let one = synthetic_history(&truth, 1)[0];
        assert!(matches!(fit_curves(&vec![one; 20], &cfg), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn bundled_default_peak_curve_is_monotone() {
        let cfg = TesConfig::default();
        assert!(TesCurves::synthetic_default().peak_is_monotone(cfg.t_min, cfg.t_discharge_limit));
    }

    proptest! {
        #[test]
        fn energy_bookkeeping(loads in proptest::collection::vec(0.0f64..900.0, 1..200), t0 in 5.0f64..13.0) {
            let cfg = TesConfig::default();
            let d = simulate_discharge(t0, &loads, 300.0, &cfg, &TesCurves::identity()).unwrap();
            let s = d.final_state;
            let lhs = s.t_avg - t0;
            let rhs = s.q_cum * 3600.0 / cfg.heat_capacity();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12));
            prop_assert!(d.t_avg.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn charge_shift_is_exact(loads in proptest::collection::vec(0.0f64..900.0, 1..100), t0 in 5.0f64..10.0, delta in 0.0f64..3.0) {
            let cfg = TesConfig::default();
            let a = simulate_discharge(t0, &loads, 300.0, &cfg, &TesCurves::identity()).unwrap();
            let b = simulate_discharge(t0 + delta, &loads, 300.0, &cfg, &TesCurves::identity()).unwrap();
            for (x, y) in a.t_avg.iter().zip(&b.t_avg) {
                prop_assert!((y - x - delta).abs() < 1e-9);
            }
            prop_assert!(b.t_out_peak >= a.t_out_peak);
        }
    }
}
