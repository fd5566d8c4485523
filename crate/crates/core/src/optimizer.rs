//! Day-ahead charging-temperature optimization.
//!
//! For one day the chain runs load → humidity → coil limit once, since none
//! of it depends on the charging temperature, and then only the tank
//! discharge is re-simulated per candidate. A candidate is feasible when the
//! predicted outlet temperature stays at or below the coil limit temperature
//! at the peak-load step and at the final operating step (the latter also
//! capped by the tank's discharge limit).
//!
//! The answer is the warmest feasible candidate on a grid of spacing `tol`
//! over `[t_min, t_max]`, found by bisection. Bisection assumes feasibility
//! is monotone in the charging temperature; the optimizer samples below each
//! answer and falls back to a full grid scan when that assumption fails.

use std::io::Write;

use chrono::{Duration, NaiveDateTime};

use crate::coil::{self, CoilModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::humidity::{HumidityEnsemble, HumidityExogenous};
use crate::ingest::format_timestamp;
use crate::rcload::{self, RcInputs, RcParams, RcState};
use crate::tes::{self, TesConfig, TesCurves};
use crate::TIMESTEP_S;

pub const DEFAULT_TOLERANCE_DEGC: f64 = 0.05;
pub const DEFAULT_BASELINE_DEGC: f64 = 7.0;
/// Candidates re-checked below every bisection answer.
pub const MONOTONICITY_SAMPLES: usize = 5;

/// Forecast inputs for one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepForecast {
    pub t_oa: f64,
    pub rh_oa: f64,
    /// W
    pub q_sol: f64,
    pub t_set: f64,
    pub ahu_on: bool,
    /// W
    pub q_int: f64,
}

/// Trained models shared by every day of a season.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    /// Without an ensemble the indoor RH is held at the day's initial value.
    pub humidity: Option<HumidityEnsemble>,
    pub rc: RcParams,
    pub coil: CoilModel,
    pub curves: TesCurves,
    pub tes: TesConfig,
}

#[derive(Debug, Clone)]
pub struct DayContext<'a> {
    pub label: String,
    pub start: NaiveDateTime,
    pub steps: Vec<StepForecast>,
    /// Whole-building to reference-coil load ratio.
    pub scaling_factor: f64,
    pub rc_state0: RcState,
    /// Last known indoor RH before the day (%).
    pub rh_init: f64,
    /// Supply airflow while the AHU runs (kg/s).
    pub airflow: f64,
    pub models: &'a ModelSet,
}

impl DayContext<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::invalid(format!("day {}: no forecast steps", self.label)));
        }
        if !(self.scaling_factor >= 1.0) {
            return Err(Error::invalid(format!(
                "day {}: scaling factor {} must be >= 1",
                self.label, self.scaling_factor
            )));
        }
        if !(self.airflow > 0.0) {
            return Err(Error::invalid("airflow must be positive"));
        }
        self.models.tes.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitingConstraint {
    /// Nothing binds: the candidate (or the box maximum) is feasible.
    Box,
    Peak,
    End,
    CoilInfeasible,
}

impl LimitingConstraint {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitingConstraint::Box => "box",
            LimitingConstraint::Peak => "peak",
            LimitingConstraint::End => "end",
            LimitingConstraint::CoilInfeasible => "coil-infeasible",
        }
    }
}

/// Multiply a load series by the building scaling factor.
pub fn scale_load(q: &[f64], scaling_factor: f64) -> Result<Vec<f64>> {
    if !(scaling_factor > 0.0) {
        return Err(Error::invalid(format!("scaling factor {scaling_factor} must be > 0")));
    }
    Ok(q.iter().map(|v| v * scaling_factor).collect())
}

/// Everything about a day that does not depend on the charging temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct DayDemand {
    pub rh: Vec<f64>,
    pub t_room: Vec<f64>,
    /// Reference-zone sensible load (kW).
    pub q_zone: Vec<f64>,
    /// Whole-building coil load drawn from the tank (kW).
    pub q_building: Vec<f64>,
    /// Coil limit temperature per step; NaN while the AHU is off.
    pub t_limit: Vec<f64>,
    /// First and last operating step.
    pub window: Option<(usize, usize)>,
    /// Step whose coil load cannot be met at any chilled-water temperature.
    pub coil_infeasible_at: Option<usize>,
}

impl DayDemand {
    pub fn daily_load_kwh(&self) -> f64 {
        self.q_building.iter().sum::<f64>() * TIMESTEP_S / 3600.0
    }
}

/// Run the load, humidity and coil-limit stages for one day.
pub fn day_demand(ctx: &DayContext) -> Result<DayDemand> {
    ctx.validate()?;
    let m = ctx.models;
    let rc_inputs: Vec<RcInputs> = ctx
        .steps
        .iter()
        .map(|s| RcInputs {
            t_oa: s.t_oa,
            q_sol: s.q_sol,
            q_int: s.q_int,
            t_set: s.t_set,
            ahu_on: s.ahu_on,
        })
        .collect();
    let load = rcload::predict_series(&m.rc, ctx.rc_state0, &rc_inputs, TIMESTEP_S)?;
    let rh = match &m.humidity {
        Some(ens) => {
            let exo: Vec<HumidityExogenous> = ctx
                .steps
                .iter()
                .zip(&load.t_room)
                .map(|(s, &t_in)| HumidityExogenous {
                    t_oa: s.t_oa,
                    rh_oa: s.rh_oa,
                    t_in,
                    t_set: s.t_set,
                    ahu_on: s.ahu_on,
                })
                .collect();
            ens.forecast_day(&exo, ctx.rh_init)?
        }
        None => vec![ctx.rh_init; ctx.steps.len()],
    };
    let q_zone: Vec<f64> = load.q_required.iter().map(|q| q / 1000.0).collect();
    let q_coil: Vec<f64> = q_zone.iter().map(|q| q / m.coil.shr).collect();
    let q_building = scale_load(&q_coil, ctx.scaling_factor)?;

    let mut t_limit = vec![f64::NAN; ctx.steps.len()];
    let mut coil_infeasible_at = None;
    for (k, s) in ctx.steps.iter().enumerate() {
        if !s.ahu_on {
            continue;
        }
        match coil::limit_temperature(&m.coil, q_coil[k], load.t_room[k], rh[k], ctx.airflow) {
            Ok(t) => t_limit[k] = t,
            Err(Error::InfeasibleLoad { .. }) => {
                coil_infeasible_at.get_or_insert(k);
            }
            Err(e) => return Err(e),
        }
    }
    let first = ctx.steps.iter().position(|s| s.ahu_on);
    let last = ctx.steps.iter().rposition(|s| s.ahu_on);
    Ok(DayDemand {
        rh,
        t_room: load.t_room,
        q_zone,
        q_building,
        t_limit,
        window: first.zip(last),
        coil_infeasible_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateOptions {
    /// Check the peak outlet curve against the limit at every operating step.
    pub strict: bool,
}

#[allow(clippy::derivable_impls)]
impl Default for EvaluateOptions {
    fn default() -> Self {
        Self { strict: false }
    }
}

/// Outcome of one candidate charging temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub t_charge: f64,
    pub feasible: bool,
    /// Box when feasible, otherwise the violated check.
    pub constraint: LimitingConstraint,
    pub t_out_peak: f64,
    pub t_out_end: f64,
    pub peak_step: Option<usize>,
    pub end_step: Option<usize>,
    /// Tank mean temperature at the start of every step (°C).
    pub t_avg: Vec<f64>,
    /// Predicted outlet temperature per operating step; NaN elsewhere.
    pub t_tes_out: Vec<f64>,
    pub extrapolated: bool,
}

/// Simulate the tank for one candidate against a precomputed demand.
pub fn evaluate_demand(
    t_charge: f64,
    demand: &DayDemand,
    models: &ModelSet,
    opts: EvaluateOptions,
) -> Result<CandidateResult> {
    let cfg = &models.tes;
    let n = demand.q_building.len();
    let Some((first, last)) = demand.window else {
        if !(cfg.t_min..=cfg.t_max).contains(&t_charge) {
            return Err(Error::invalid(format!(
                "charging temperature {t_charge} °C outside the box"
            )));
        }
        return Ok(CandidateResult {
            t_charge,
            feasible: true,
            constraint: LimitingConstraint::Box,
            t_out_peak: t_charge,
            t_out_end: t_charge,
            peak_step: None,
            end_step: None,
            t_avg: vec![t_charge; n],
            t_tes_out: vec![f64::NAN; n],
            extrapolated: false,
        });
    };
    let window = &demand.q_building[first..=last];
    let dis = tes::simulate_discharge(t_charge, window, TIMESTEP_S, cfg, &models.curves)?;
    let mut t_avg = vec![t_charge; n];
    for (k, v) in dis.t_avg.iter().enumerate() {
        if first + k + 1 < n {
            t_avg[first + k + 1] = *v;
        }
    }
    for v in &mut t_avg[(last + 2).min(n)..] {
        *v = dis.final_state.t_avg;
    }
    let mut t_tes_out = vec![f64::NAN; n];
    for (k, v) in dis.t_avg.iter().enumerate() {
        t_tes_out[first + k] = tes::peak_outlet(*v, t_charge, &models.curves, cfg).value;
    }
    let peak_step = first + dis.peak_index;
    let mut result = CandidateResult {
        t_charge,
        feasible: false,
        constraint: LimitingConstraint::CoilInfeasible,
        t_out_peak: dis.t_out_peak,
        t_out_end: dis.t_out_end,
        peak_step: Some(peak_step),
        end_step: Some(last),
        t_avg,
        t_tes_out,
        extrapolated: dis.extrapolated,
    };
    if demand.coil_infeasible_at.is_some() {
        return Ok(result);
    }
    let peak_ok = dis.t_out_peak <= demand.t_limit[peak_step]
        && (!opts.strict || (first..=last).all(|k| result.t_tes_out[k] <= demand.t_limit[k]));
    let end_ok = dis.t_out_end <= demand.t_limit[last].min(cfg.t_discharge_limit);
    result.feasible = peak_ok && end_ok;
    result.constraint = if !peak_ok {
        LimitingConstraint::Peak
    } else if !end_ok {
        LimitingConstraint::End
    } else {
        LimitingConstraint::Box
    };
    Ok(result)
}

/// One day's decision with its supporting trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    pub label: String,
    pub start: NaiveDateTime,
    pub t_charge_star: f64,
    pub feasible: bool,
    pub limiting_constraint: LimitingConstraint,
    pub t_out_peak: f64,
    pub t_out_end: f64,
    pub peak_step: Option<usize>,
    pub end_step: Option<usize>,
    pub daily_load_kwh: f64,
    /// Rise of the tank mean temperature over the day (K).
    pub delta_t_day: f64,
    pub demand: DayDemand,
    pub t_avg: Vec<f64>,
    pub t_tes_out: Vec<f64>,
    pub evaluations: usize,
    pub grid_fallback: bool,
}

impl DayPlan {
    pub fn margin(&self, baseline: f64) -> Option<f64> {
        self.feasible.then_some(self.t_charge_star - baseline)
    }

    /// Re-check the plan's own inequalities from its stored trajectories.
    pub fn certificate_holds(&self, tes: &TesConfig) -> bool {
        if !self.feasible {
            return true;
        }
        match (self.peak_step, self.end_step) {
            (Some(p), Some(e)) => {
                self.t_out_peak <= self.demand.t_limit[p]
                    && self.t_out_end <= self.demand.t_limit[e].min(tes.t_discharge_limit)
            }
            _ => true,
        }
    }
}

/// Evaluate a single candidate through the whole chain.
pub fn evaluate_candidate(t_charge: f64, ctx: &DayContext, opts: EvaluateOptions) -> Result<DayPlan> {
    let demand = day_demand(ctx)?;
    let r = evaluate_demand(t_charge, &demand, ctx.models, opts)?;
    Ok(make_plan(ctx, demand, r, 1, false))
}

fn make_plan(
    ctx: &DayContext,
    demand: DayDemand,
    r: CandidateResult,
    evaluations: usize,
    grid_fallback: bool,
) -> DayPlan {
    let daily_load_kwh = demand.daily_load_kwh();
    DayPlan {
        label: ctx.label.clone(),
        start: ctx.start,
        t_charge_star: r.t_charge,
        feasible: r.feasible,
        limiting_constraint: r.constraint,
        t_out_peak: r.t_out_peak,
        t_out_end: r.t_out_end,
        peak_step: r.peak_step,
        end_step: r.end_step,
        daily_load_kwh,
        delta_t_day: daily_load_kwh / ctx.models.tes.kwh_per_kelvin(),
        demand,
        t_avg: r.t_avg,
        t_tes_out: r.t_tes_out,
        evaluations,
        grid_fallback,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub tolerance: f64,
    pub evaluate: EvaluateOptions,
    /// Used by the grid fallback.
    pub execution: Execution,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE_DEGC,
            evaluate: EvaluateOptions::default(),
            execution: Execution::default(),
        }
    }
}

/// Candidate grid `t_min + i·tol`, always ending at `t_max`.
pub fn candidate_grid(tes: &TesConfig, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance {tol} must be > 0")));
    }
    let span = tes.t_max - tes.t_min;
    let n = (span / tol - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| (tes.t_min + i as f64 * tol).min(tes.t_max)).collect())
}

/// Warmest feasible charging temperature for one day.
pub fn optimize_charging_temperature(ctx: &DayContext, opts: &OptimizeOptions) -> Result<DayPlan> {
    let demand = day_demand(ctx)?;
    let models = ctx.models;
    let grid = candidate_grid(&models.tes, opts.tolerance)?;
    let evals = std::cell::Cell::new(0usize);
    let eval = |i: usize| -> CandidateResult {
        evals.set(evals.get() + 1);
        evaluate_demand(grid[i], &demand, models, opts.evaluate).unwrap_or_else(|e| {
            log::warn!("day {}: candidate {:.2} °C failed: {e}", ctx.label, grid[i]);
            failed_candidate(grid[i], demand.q_building.len())
        })
    };

    let low = eval(0);
    if !low.feasible {
        return Ok(make_plan(ctx, demand.clone(), low, evals.get(), false));
    }
    let top = grid.len() - 1;
    let high = eval(top);
    if high.feasible {
        return Ok(make_plan(ctx, demand.clone(), high, evals.get(), false));
    }

    let monotone_curve = models
        .curves
        .peak_is_monotone(models.tes.t_min - 1.0, models.tes.t_discharge_limit + 1.0);
    if monotone_curve {
        // invariant: grid[lo] feasible, grid[hi] infeasible
        let (mut lo, mut hi) = (0usize, top);
        let mut lo_result = low;
        let mut hi_result = high;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let r = eval(mid);
            if r.feasible {
                lo = mid;
                lo_result = r;
            } else {
                hi = mid;
                hi_result = r;
            }
        }
        let below_ok = (1..=MONOTONICITY_SAMPLES)
            .map(|j| lo * j / (MONOTONICITY_SAMPLES + 1))
            .filter(|&i| i > 0 && i < lo)
            .all(|i| eval(i).feasible);
        if below_ok {
            lo_result.constraint = hi_result.constraint;
            return Ok(make_plan(ctx, demand.clone(), lo_result, evals.get(), false));
        }
        log::warn!(
            "day {}: feasibility not monotone in the charging temperature, scanning the grid",
            ctx.label
        );
    }

    let scanned = opts.execution.map_range(grid.len(), |i| {
        evaluate_demand(grid[i], &demand, models, opts.evaluate)
            .unwrap_or_else(|_| failed_candidate(grid[i], demand.q_building.len()))
    });
    let n_evals = evals.get() + grid.len();
    let best = scanned.iter().rposition(|r| r.feasible).unwrap_or(0);
    let mut chosen = scanned[best].clone();
    if let Some(next) = scanned.get(best + 1) {
        chosen.constraint = next.constraint;
    }
    Ok(make_plan(ctx, demand, chosen, n_evals, true))
}

fn failed_candidate(t_charge: f64, n: usize) -> CandidateResult {
    CandidateResult {
        t_charge,
        feasible: false,
        constraint: LimitingConstraint::CoilInfeasible,
        t_out_peak: f64::NAN,
        t_out_end: f64::NAN,
        peak_step: None,
        end_step: None,
        t_avg: vec![f64::NAN; n],
        t_tes_out: vec![f64::NAN; n],
        extrapolated: false,
    }
}

/// Largest feasible grid candidate by exhaustive scan.
pub fn grid_search(ctx: &DayContext, opts: &OptimizeOptions) -> Result<Option<f64>> {
    let demand = day_demand(ctx)?;
    let grid = candidate_grid(&ctx.models.tes, opts.tolerance)?;
    let feasible = opts.execution.map(&grid, |&t| {
        evaluate_demand(t, &demand, ctx.models, opts.evaluate)
            .map(|r| r.feasible)
            .unwrap_or(false)
    });
    Ok(feasible.iter().rposition(|f| *f).map(|i| grid[i]))
}

/// Optimize every day independently.
pub fn optimize_season(days: &[DayContext], opts: &OptimizeOptions) -> Vec<Result<DayPlan>> {
    let inner = OptimizeOptions {
        execution: Execution::Sequential,
        ..*opts
    };
    opts.execution
        .map(days, |ctx| optimize_charging_temperature(ctx, &inner))
}

pub const SEASON_REPORT_HEADER: [&str; 10] = [
    "day",
    "date",
    "feasible",
    "t_charge_star_degc",
    "t_baseline_degc",
    "margin_degc",
    "t_out_peak_degc",
    "t_out_end_degc",
    "daily_load_kwh",
    "limiting_constraint",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonRow {
    pub day: usize,
    pub label: String,
    pub feasible: bool,
    pub t_charge_star: f64,
    pub t_baseline: f64,
    pub margin: Option<f64>,
    pub t_out_peak: f64,
    pub t_out_end: f64,
    pub daily_load_kwh: f64,
    pub delta_t_day: f64,
    pub limiting_constraint: LimitingConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonReport {
    pub rows: Vec<SeasonRow>,
    /// Mean margin over feasible days.
    pub mean_margin: Option<f64>,
    pub infeasible_days: usize,
}

pub fn compare_baseline(plans: &[DayPlan], t_baseline: f64) -> Result<SeasonReport> {
    if plans.is_empty() {
        return Err(Error::invalid("season report needs at least one day"));
    }
    let rows: Vec<SeasonRow> = plans
        .iter()
        .enumerate()
        .map(|(i, p)| SeasonRow {
            day: i + 1,
            label: p.label.clone(),
            feasible: p.feasible,
            t_charge_star: p.t_charge_star,
            t_baseline,
            margin: p.margin(t_baseline),
            t_out_peak: p.t_out_peak,
            t_out_end: p.t_out_end,
            daily_load_kwh: p.daily_load_kwh,
            delta_t_day: p.delta_t_day,
            limiting_constraint: p.limiting_constraint,
        })
        .collect();
    let margins: Vec<f64> = rows.iter().filter_map(|r| r.margin).collect();
    let mean_margin = (!margins.is_empty()).then(|| margins.iter().sum::<f64>() / margins.len() as f64);
    Ok(SeasonReport {
        infeasible_days: rows.iter().filter(|r| !r.feasible).count(),
        rows,
        mean_margin,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        String::new()
    }
}

impl SeasonReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SEASON_REPORT_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.day.to_string(),
                r.label.clone(),
                (r.feasible as u8).to_string(),
                num(r.t_charge_star),
                num(r.t_baseline),
                opt(r.margin),
                num(r.t_out_peak),
                num(r.t_out_end),
                num(r.daily_load_kwh),
                r.limiting_constraint.as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plot data: initial and end-of-operation tank temperature under the
    /// baseline and the optimized setpoint, and the daily load.
    pub fn write_panels_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(PANEL_HEADER)?;
        for r in &self.rows {
            let star = r.feasible.then_some(r.t_charge_star);
            out.write_record([
                r.day.to_string(),
                r.label.clone(),
                num(r.t_baseline),
                opt(star),
                num(r.t_baseline + r.delta_t_day),
                opt(star.map(|t| t + r.delta_t_day)),
                num(r.daily_load_kwh),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} days, {} infeasible, mean margin {}",
            self.rows.len(),
            self.infeasible_days,
            self.mean_margin
                .map(|m| format!("{m:+.2} °C"))
                .unwrap_or_else(|| "n/a".into())
        )
    }
}

pub const PANEL_HEADER: [&str; 7] = [
    "day",
    "date",
    "t_init_baseline_degc",
    "t_init_optimized_degc",
    "t_end_baseline_degc",
    "t_end_optimized_degc",
    "daily_load_kwh",
];

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "timestamp",
    "ahu_on",
    "rh_in_pct",
    "t_room_degc",
    "q_zone_kw",
    "q_building_kw",
    "t_limit_degc",
    "t_avg_degc",
    "t_tes_out_degc",
    "checkpoint",
];

/// Per-step trajectories of a plan.
pub fn write_trajectory_csv<W: Write>(w: W, plan: &DayPlan) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    let d = &plan.demand;
    for k in 0..d.q_building.len() {
        let on = d.window.is_some_and(|(a, b)| (a..=b).contains(&k)) && d.t_limit[k].is_finite();
        let checkpoint = match (Some(k) == plan.peak_step, Some(k) == plan.end_step) {
            (true, true) => "peak+end",
            (true, false) => "peak",
            (false, true) => "end",
            _ => "",
        };
        out.write_record([
            format_timestamp(&(plan.start + Duration::seconds((k as f64 * TIMESTEP_S) as i64))),
            (on as u8).to_string(),
            num(d.rh[k]),
            num(d.t_room[k]),
            num(d.q_zone[k]),
            num(d.q_building[k]),
            num(d.t_limit[k]),
            num(plan.t_avg[k]),
            num(plan.t_tes_out[k]),
            checkpoint.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models(curves: TesCurves) -> ModelSet {
        ModelSet {
            humidity: None,
            rc: rcload::default_init(),
            coil: CoilModel::physics_only(9.0),
            curves,
            tes: TesConfig::default(),
        }
    }

    fn ctx<'a>(m: &'a ModelSet, gains: f64) -> DayContext<'a> {
        let steps = (0..crate::STEPS_PER_DAY)
            .map(|k| StepForecast {
                t_oa: 24.0,
                rh_oa: 60.0,
                q_sol: 0.0,
                t_set: 24.0,
                ahu_on: (96..216).contains(&k),
                q_int: gains,
            })
            .collect();
        DayContext {
            label: "d".into(),
            start: crate::ingest::parse_timestamp("2024-07-01 00:00").unwrap(),
            steps,
            scaling_factor: 1.0,
            rc_state0: RcState {
                t_room: 24.0,
                t_mass: 24.0,
            },
            rh_init: 50.0,
            airflow: coil::RATED_AIRFLOW_KG_S,
            models: m,
        }
    }

    #[test]
    fn scale_load_is_elementwise() {
        assert_eq!(scale_load(&[10.0, 20.0], 5.0).unwrap(), vec![50.0, 100.0]);
        assert_eq!(scale_load(&[1.5], 1.0).unwrap(), vec![1.5]);
        assert!(scale_load(&[1.0], 0.0).is_err());
    }

    #[test]
    fn zero_load_day_is_box_bound() {
        let m = models(TesCurves::identity());
        let c = ctx(&m, 0.0);
        let plan = evaluate_candidate(9.0, &c, EvaluateOptions::default()).unwrap();
        assert!(plan.feasible);
        assert_eq!(plan.limiting_constraint, LimitingConstraint::Box);
        let best = optimize_charging_temperature(&c, &OptimizeOptions::default()).unwrap();
        assert_eq!(best.t_charge_star, 13.0);
        let again = evaluate_candidate(9.0, &c, EvaluateOptions::default()).unwrap();
        assert_eq!(format!("{again:?}"), format!("{plan:?}"));
    }

    #[test]
    fn grid_includes_both_ends() {
        let g = candidate_grid(&TesConfig::default(), 0.05).unwrap();
        assert_eq!(g.len(), 161);
        assert_eq!(g[0], 5.0);
        assert_eq!(*g.last().unwrap(), 13.0);
    }

    #[test]
    fn report_arithmetic() {
        let m = models(TesCurves::identity());
        let c = ctx(&m, 0.0);
        let mut p = optimize_charging_temperature(&c, &OptimizeOptions::default()).unwrap();
        let r = compare_baseline(&[p.clone(), p.clone()], 7.0).unwrap();
        assert_eq!(r.mean_margin, Some(6.0));
        p.feasible = false;
        let r = compare_baseline(&[p.clone(), r_plan(&c)], 7.0).unwrap();
        assert_eq!(r.infeasible_days, 1);
        assert_eq!(r.mean_margin, Some(6.0));
        assert!(compare_baseline(&[], 7.0).is_err());
    }

    fn r_plan(c: &DayContext) -> DayPlan {
        optimize_charging_temperature(c, &OptimizeOptions::default()).unwrap()
    }

    #[test]
    fn identity_curves_follow_the_energy_balance() {
        let m = models(TesCurves::identity());
        for (gains, binding) in [
            (20_000.0, LimitingConstraint::Peak),
            (10_000.0, LimitingConstraint::Box),
        ] {
            let c = ctx(&m, gains);
            let plan = optimize_charging_temperature(&c, &OptimizeOptions::default()).unwrap();
            assert!(plan.feasible);
            assert_eq!(plan.limiting_constraint, binding);
            let (p, last) = (plan.peak_step.unwrap(), plan.end_step.unwrap());
            assert!((plan.t_out_end - plan.t_charge_star - plan.delta_t_day).abs() < 1e-9);
            let peak_rise = plan.t_out_peak - plan.t_charge_star;
            let bound = (plan.demand.t_limit[p] - peak_rise)
                .min(plan.demand.t_limit[last].min(m.tes.t_discharge_limit) - plan.delta_t_day);
            let grid = candidate_grid(&m.tes, 0.05).unwrap();
            let expect = grid.iter().rev().find(|&&t| t <= bound + 1e-9).copied().unwrap();
            assert!(
                (plan.t_charge_star - expect).abs() < 1e-9,
                "{} vs {expect}",
                plan.t_charge_star
            );
            assert!(plan.certificate_holds(&m.tes));
            assert!(!plan.grid_fallback);
        }
    }

    #[test]
    fn bisection_matches_exhaustive_scan() {
        for gains in [10_000.0, 20_000.0, 30_000.0, 40_000.0] {
            let m = models(TesCurves::identity());
            let c = ctx(&m, gains);
            let opts = OptimizeOptions::default();
            let plan = optimize_charging_temperature(&c, &opts).unwrap();
            let scan = grid_search(&c, &opts).unwrap();
            assert_eq!(scan, plan.feasible.then_some(plan.t_charge_star), "gains {gains}");
            assert!(plan.evaluations < 20);
        }
    }

    #[test]
    fn non_monotone_curve_falls_back_to_the_grid() {
        let mut curves = TesCurves::identity();
        curves.peak = [0.1, -3.5, 40.6, -144.0];
        let m = models(curves);
        let c = ctx(&m, 20_000.0);
        let opts = OptimizeOptions::default();
        let plan = optimize_charging_temperature(&c, &opts).unwrap();
        assert!(plan.grid_fallback);
        assert_eq!(plan.evaluations, 2 + 161);
        let scan = grid_search(&c, &opts).unwrap();
        assert_eq!(scan, plan.feasible.then_some(plan.t_charge_star));
    }
}
