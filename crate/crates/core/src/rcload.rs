//! Single-zone 4R2C grey-box load model.
//!
//! Two capacitances (room air, envelope mass) and three physical resistances,
//! plus a virtual variable resistance `R_AHU` linking the room node to the
//! setpoint while the air handler runs:
//!
//! ```text
//! C_air  dT_r/dt = (T_oa − T_r)/R3 + (T_m − T_r)/R2 + Q_int − Q_req
//! C_mass dT_m/dt = (T_oa − T_m)/R1 + (T_r − T_m)/R2 + Q_sol
//! Q_req  = max(0, T_r − T_set) / R_AHU · ahu_on
//! 1/R_AHU = a + b1·(T_r − T_set) + b2·(T_oa − T_r) + c·ahu_on
//! ```
//!
//! `R_AHU` is clamped to `[R_AHU_MIN, R_AHU_MAX]`. Integration is explicit
//! Euler; the required load is evaluated at the start of each step.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::{STEPS_PER_DAY, TIMESTEP_S};

pub const R_AHU_MIN: f64 = 1e-5;
pub const R_AHU_MAX: f64 = 1e5;
pub const MAX_DT_S: f64 = 900.0;
/// Largest room/mass temperature split accepted as physical (K).
pub const MAX_NODE_SPLIT: f64 = 30.0;
/// Two weeks at the 5-minute cadence.
pub const MIN_CALIBRATION_SAMPLES: usize = 14 * STEPS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcParams {
    /// K/W
    pub r_env1: f64,
    pub r_env2: f64,
    pub r_env3: f64,
    /// J/K
    pub c_mass: f64,
    pub c_air: f64,
    /// (a, b1, b2, c) of the AHU conductance closure, W/K and W/K².
    pub r_ahu_coeffs: [f64; 4],
}

impl RcParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.r_env1, self.r_env2, self.r_env3, self.c_mass, self.c_air];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(
                "RC resistances and capacitances must be positive and finite",
            ));
        }
        if self.r_ahu_coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("R_AHU coefficients must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcState {
    pub t_room: f64,
    pub t_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcInputs {
    pub t_oa: f64,
    /// W
    pub q_sol: f64,
    /// W
    pub q_int: f64,
    pub t_set: f64,
    pub ahu_on: bool,
}

/// Virtual AHU resistance (K/W) under the linear-conductance closure.
pub fn r_ahu(t_set: f64, t_room: f64, t_oa: f64, ahu_on: bool, coeffs: &[f64; 4]) -> f64 {
    let [a, b1, b2, c] = *coeffs;
    let g = a + b1 * (t_room - t_set) + b2 * (t_oa - t_room) + if ahu_on { c } else { 0.0 };
    let r = 1.0 / g;
    if r.is_nan() || r <= 0.0 {
        // non-positive conductance: the branch is as weak as allowed
        R_AHU_MAX
    } else {
        r.clamp(R_AHU_MIN, R_AHU_MAX)
    }
}

/// Required cooling (W) at the current state.
pub fn required_load(state: &RcState, inputs: &RcInputs, params: &RcParams) -> f64 {
    if !inputs.ahu_on {
        return 0.0;
    }
    let r = r_ahu(inputs.t_set, state.t_room, inputs.t_oa, true, &params.r_ahu_coeffs);
    (state.t_room - inputs.t_set).max(0.0) / r
}

/// State derivatives (K/s) for a given required load.
pub(crate) fn derivatives(state: &RcState, inputs: &RcInputs, params: &RcParams, q_req: f64) -> (f64, f64) {
    let RcState { t_room, t_mass } = *state;
    let d_room = ((inputs.t_oa - t_room) / params.r_env3 + (t_mass - t_room) / params.r_env2 + inputs.q_int - q_req)
        / params.c_air;
    let d_mass =
        ((inputs.t_oa - t_mass) / params.r_env1 + (t_room - t_mass) / params.r_env2 + inputs.q_sol) / params.c_mass;
    (d_room, d_mass)
}

/// One explicit-Euler step. Returns the new state and the required load (W)
/// over the step.
pub fn step(state: &RcState, inputs: &RcInputs, params: &RcParams, dt: f64) -> Result<(RcState, f64)> {
    if !(dt > 0.0 && dt <= MAX_DT_S) {
        return Err(Error::invalid(format!("timestep {dt} s outside (0, {MAX_DT_S}]")));
    }
    let q = required_load(state, inputs, params);
    let (dr, dm) = derivatives(state, inputs, params, q);
    let next = RcState {
        t_room: state.t_room + dt * dr,
        t_mass: state.t_mass + dt * dm,
    };
    if !(next.t_room.is_finite() && next.t_mass.is_finite() && q.is_finite())
        || (next.t_room - next.t_mass).abs() >= MAX_NODE_SPLIT
    {
        return Err(Error::NumericalInstability(format!(
            "RC step diverged (dt = {dt} s): room {:.3}, mass {:.3}",
            next.t_room, next.t_mass
        )));
    }
    Ok((next, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayPrediction {
    /// Room temperature at the start of each step.
    pub t_room: Vec<f64>,
    /// W
    pub q_required: Vec<f64>,
    /// Wh
    pub q_cumulative: f64,
    pub end_state: RcState,
}

/// Fold [`step`] over a contiguous input series at `dt` seconds.
pub fn predict_series(params: &RcParams, state0: RcState, inputs: &[RcInputs], dt: f64) -> Result<DayPrediction> {
    let mut state = state0;
    let mut t_room = Vec::with_capacity(inputs.len());
    let mut q_required = Vec::with_capacity(inputs.len());
    let mut q_cumulative = 0.0;
    for inp in inputs {
        t_room.push(state.t_room);
        let (next, q) = step(&state, inp, params, dt)?;
        q_required.push(q);
        q_cumulative += q * dt / 3600.0;
        state = next;
    }
    Ok(DayPrediction {
        t_room,
        q_required,
        q_cumulative,
        end_state: state,
    })
}

/// [`predict_series`] at the standard 5-minute step.
pub fn predict_day(params: &RcParams, state0: RcState, day: &[RcInputs]) -> Result<DayPrediction> {
    predict_series(params, state0, day, TIMESTEP_S)
}

/// One calibration sample: inputs and the measured response at the start of
/// the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcSample {
    pub inputs: RcInputs,
    pub t_room: f64,
    /// W
    pub q: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_evals: usize,
    pub polish_rounds: usize,
    pub execution: Execution,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            seed: 0x5eed_4c0a,
            max_evals: 2500,
            polish_rounds: 4,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: RcParams,
    /// Initial state, with the mass node offset identified alongside the
    /// parameters.
    pub state0: RcState,
    pub objective: f64,
    pub init_objective: f64,
    /// False when no start improved on `init`.
    pub improved: bool,
    /// Objective reached by each multi-start, in start order.
    pub start_objectives: Vec<f64>,
}

/// Search box in the optimizer's coordinates: log R, log C, coefficients in
/// units of 1e4 W/K, initial mass-node offset in K.
const LOWER: [f64; 10] = [-9.9, -11.0, -9.9, 17.2, 15.4, 0.0, -0.5, -0.5, 0.0, -4.0];
const UPPER: [f64; 10] = [-5.3, -6.9, -5.3, 21.8, 20.0, 5.0, 2.0, 0.5, 5.0, 4.0];

fn encode(p: &RcParams, offset: f64) -> [f64; 10] {
    let [a, b1, b2, c] = p.r_ahu_coeffs;
    [
        p.r_env1.ln(),
        p.r_env2.ln(),
        p.r_env3.ln(),
        p.c_mass.ln(),
        p.c_air.ln(),
        a / 1e4,
        b1 / 1e4,
        b2 / 1e4,
        c / 1e4,
        offset,
    ]
}

fn decode(x: &[f64]) -> (RcParams, f64) {
    (
        RcParams {
            r_env1: x[0].exp(),
            r_env2: x[1].exp(),
            r_env3: x[2].exp(),
            c_mass: x[3].exp(),
            c_air: x[4].exp(),
            r_ahu_coeffs: [x[5] * 1e4, x[6] * 1e4, x[7] * 1e4, x[8] * 1e4],
        },
        x[9],
    )
}

struct Objective<'a> {
    samples: &'a [RcSample],
    t_scale: f64,
    q_scale: f64,
    dt: f64,
}

const PENALTY: f64 = 1e6;

impl Objective<'_> {
    fn new(samples: &[RcSample], dt: f64) -> Objective<'_> {
        let std = |f: &dyn Fn(&RcSample) -> f64| {
            let n = samples.len() as f64;
            let m = samples.iter().map(f).sum::<f64>() / n;
            (samples.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / n).sqrt()
        };
        let t_scale = std(&|s| s.t_room);
        let q_scale = std(&|s| s.q);
        Objective {
            samples,
            t_scale: if t_scale > 0.0 { t_scale } else { 1.0 },
            q_scale: if q_scale > 0.0 { q_scale } else { 1.0 },
            dt,
        }
    }

    fn eval(&self, params: &RcParams, state0: RcState) -> f64 {
        if params.validate().is_err() {
            return PENALTY;
        }
        let mut state = state0;
        let (mut se_t, mut se_q) = (0.0, 0.0);
        for s in self.samples {
            let Ok((next, q)) = step(&state, &s.inputs, params, self.dt) else {
                return PENALTY;
            };
            se_t += (state.t_room - s.t_room).powi(2);
            se_q += (q - s.q).powi(2);
            state = next;
        }
        let n = self.samples.len() as f64;
        let j = (se_t / n).sqrt() / self.t_scale + (se_q / n).sqrt() / self.q_scale;
        if j.is_finite() {
            j
        } else {
            PENALTY
        }
    }

    fn start(&self, offset: f64) -> RcState {
        let t0 = self.samples[0].t_room;
        RcState {
            t_room: t0,
            t_mass: t0 + offset,
        }
    }

    fn eval_x(&self, x: &[f64]) -> f64 {
        let (p, off) = decode(x);
        self.eval(&p, self.start(off))
    }
}

/// Objective value `RMSE(T)/σ_T + RMSE(Q)/σ_Q` of `params` started from
/// `state0` over `samples`.
pub fn objective(samples: &[RcSample], params: &RcParams, state0: RcState, dt: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    Objective::new(samples, dt).eval(params, state0)
}

fn latin_hypercube(n: usize, seed: u64) -> Vec<[f64; 10]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![[0.0; 10]; n];
    for d in 0..10 {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u = (strata[i] as f64 + rng.gen::<f64>()) / n as f64;
            p[d] = LOWER[d] + u * (UPPER[d] - LOWER[d]);
        }
    }
    points
}

/// Multi-start Nelder–Mead calibration on a contiguous 5-minute series.
pub fn calibrate(training: &[RcSample], init: &RcParams, opts: &CalibrationOptions) -> Result<Calibration> {
    if training.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InsufficientData {
            model: "rcload",
            required: MIN_CALIBRATION_SAMPLES,
            actual: training.len(),
        });
    }
    init.validate()?;
    if training
        .iter()
        .any(|s| !(s.t_room.is_finite() && s.q.is_finite() && s.inputs.t_oa.is_finite()))
    {
        return Err(Error::invalid("calibration series contains non-finite values"));
    }
    let obj = Objective::new(training, TIMESTEP_S);
    let init_x = encode(init, 0.0);
    let init_objective = obj.eval(init, obj.start(0.0));

    let mut starts = vec![init_x];
    starts.extend(latin_hypercube(opts.starts, opts.seed));
    let step: Vec<f64> = LOWER.iter().zip(&UPPER).map(|(l, u)| 0.1 * (u - l)).collect();
    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        ..NelderMeadOptions::default()
    };
    let runs = opts
        .execution
        .map(&starts, |x0| nelder_mead::minimize(|x| obj.eval_x(x), x0, &step, &nm));

    // best objective, lowest start index on ties
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.f < runs[best].f {
            best = i;
        }
    }
    let mut x = runs[best].x.clone();
    let mut f = runs[best].f;
    let small_step: Vec<f64> = step.iter().map(|s| 0.1 * s).collect();
    for _ in 0..opts.polish_rounds {
        let r = nelder_mead::minimize(|x| obj.eval_x(x), &x, &small_step, &nm);
        if !(r.f < f * (1.0 - 1e-9)) {
            if r.f < f {
                x = r.x;
                f = r.f;
            }
            break;
        }
        x = r.x;
        f = r.f;
    }

    let (mut params, mut offset) = decode(&x);
    let improved = f < init_objective;
    if !improved {
        log::warn!("RC calibration did not improve on the initial parameters (J = {init_objective:.6})");
        params = *init;
        offset = 0.0;
        f = init_objective;
    }
    Ok(Calibration {
        params,
        state0: obj.start(offset),
        objective: f,
        init_objective,
        improved,
        start_objectives: runs.iter().map(|r| r.f).collect(),
    })
}

/// Calibration start point used by the workflow when no prior is known.
pub fn default_init() -> RcParams {
    RcParams {
        r_env1: 1e-3,
        r_env2: 2e-4,
        r_env3: 1e-3,
        c_mass: 2e8,
        c_air: 3e7,
        r_ahu_coeffs: [1e4, 2e3, 0.0, 1e4],
    }
}

/// Human-readable key-value persistence.
pub fn to_toml(params: &RcParams, state0: &RcState) -> String {
    #[derive(Serialize)]
    struct Store<'a> {
        params: &'a RcParams,
        state0: &'a RcState,
    }
    toml::to_string(&Store { params, state0 }).expect("RC parameters serialize")
}

pub fn from_toml(text: &str) -> Result<(RcParams, RcState)> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Store {
        params: RcParams,
        state0: RcState,
    }
    let s: Store = toml::from_str(text).map_err(|e| Error::ModelStore(format!("RC store: {e}")))?;
    s.params.validate().map_err(|e| Error::ModelStore(e.to_string()))?;
    Ok((s.params, s.state0))
}
