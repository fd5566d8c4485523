//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use chargeopt::coil::{self, CoilModel, CoilRecord, RATED_AIRFLOW_KG_S};
use chargeopt::ingest::synth::{self, SynthConfig};
use chargeopt::metrics;
use chargeopt::optimizer::{self, DayPlan, OptimizeOptions};
use chargeopt::psychro::{self, MoistAirState};
use chargeopt::rcload::{self, RcInputs};
use chargeopt::regressor::{self, GbtHyperparams, GbtModel};
use chargeopt::tes::{self, TesConfig, TesState};
use chargeopt::workflow::{self, RunConfig};
use chargeopt::{STEPS_PER_DAY, TIMESTEP_S};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(l) = limit {
        if elapsed > l {
            o.pass = false;
        }
        o.detail
            .push_str(&format!("; {:.2} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()));
    }
    println!(
        "[{}] {id:>2}. {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn psychrometrics() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..=80 {
        let t = i as f64 * 0.5;
        let td = psychro::dew_point(&MoistAirState::new(t, 100.0).unwrap()).unwrap();
        worst = worst.max((td - t).abs());
    }
    let es0 = psychro::saturation_vapor_pressure(0.0).unwrap();
    outcome(
        worst <= 0.01 && es0 == 6.12,
        format!("max |Td(t,100) - t| = {worst:.2e} °C (tol 0.01), es(0) = {es0} hPa (exact 6.12)"),
    )
}

fn tank_energy() -> Outcome {
    let cfg = TesConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=288);
        let loads: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2_000.0)).collect();
        let t0 = rng.gen_range(cfg.t_min..=cfg.t_max);
        let mut s = TesState::charged(t0);
        for q in &loads {
            s = tes::step(&s, *q, TIMESTEP_S, &cfg).unwrap();
        }
        let expect = loads.iter().map(|q| q * TIMESTEP_S).sum::<f64>() / (cfg.mass_kg * cfg.cp_water);
        let rise = s.t_avg - t0;
        if expect > 0.0 {
            worst = worst.max((rise - expect).abs() / expect);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("1000 profiles, max relative error {worst:.2e} (tol 1e-9)"),
    )
}

fn coil_round_trip() -> Outcome {
    let model = CoilModel::physics_only(9.0);
    let rh = 55.0;
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut solved = 0;
    for i in 0..20 {
        let t_ra = 22.0 + 6.0 * i as f64 / 19.0;
        let mut prev = f64::INFINITY;
        for j in 0..20 {
            let q = 20.0 + 100.0 * j as f64 / 19.0;
            let t_lim = coil::limit_temperature(&model, q, t_ra, rh, RATED_AIRFLOW_KG_S).unwrap();
            let back = coil::predict_performance(&model, t_ra, rh, t_lim, RATED_AIRFLOW_KG_S)
                .unwrap()
                .q;
            worst = worst.max((back - q).abs() / q);
            monotone &= t_lim < prev;
            prev = t_lim;
            solved += 1;
        }
    }
    outcome(
        worst <= 1e-3 && monotone,
        format!(
            "{solved} points, max relative capacity error {:.2e} % (tol 0.1 %), strictly decreasing: {monotone}",
            worst * 100.0
        ),
    )
}

/// Rated records whose sensible drop implies exactly `eps(ua) + bias`.
fn rated_records(ua: f64, bias: f64, rng: &mut ChaCha8Rng, n: usize) -> Vec<CoilRecord> {
    let physics = CoilModel::physics_only(ua);
    (0..n)
        .map(|_| {
            let t_ra = rng.gen_range(22.0..28.0);
            let rh_ra = rng.gen_range(45.0..70.0);
            let t_w_in = rng.gen_range(5.0..10.0);
            let c_air = coil::air_capacity_rate(RATED_AIRFLOW_KG_S, t_ra, rh_ra).unwrap();
            let eps = physics.physics_effectiveness(RATED_AIRFLOW_KG_S, c_air) + bias;
            let w = psychro::humidity_ratio(&MoistAirState::new(t_ra, rh_ra).unwrap()).unwrap();
            let dh = psychro::enthalpy_from_ratio(t_ra, w) - psychro::saturated_surface_enthalpy(t_w_in).unwrap();
            let q = eps * RATED_AIRFLOW_KG_S * dh;
            CoilRecord {
                t_ra,
                t_sa: t_ra - physics.shr * q / c_air,
                rh_ra,
                t_w_in,
                valve: 100.0,
                fan_on: true,
                airflow: RATED_AIRFLOW_KG_S,
            }
        })
        .collect()
}

fn ua_identification() -> Outcome {
    let ua_true = 9.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let clean = coil::filter_rated(&rated_records(ua_true, 0.0, &mut rng, 60));
    let id = coil::identify_ua_ref(&clean, coil::DEFAULT_SHR).unwrap();
    let ua_err = (id.ua_ref - ua_true).abs() / ua_true;

    let biased = coil::filter_rated(&rated_records(ua_true, 0.05, &mut rng, 200));
    let physics = CoilModel::physics_only(ua_true);
    let trained = coil::train_residual(&biased, &physics, 7).unwrap();
    let mae = |m: &CoilModel| {
        let errs: Vec<f64> = biased
            .iter()
            .map(|r| {
                let measured = coil::measured_effectiveness(r, m.shr).unwrap().eps;
                let p = coil::predict_performance(m, r.t_ra, r.rh_ra, r.t_w_in, r.airflow).unwrap();
                (p.eps - measured).abs()
            })
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let (before, after) = (mae(&physics), mae(&trained));
    outcome(
        ua_err < 0.01 && after < 0.005,
        format!(
            "UA_ref {:.4} vs {ua_true} from {} rated records ({:.3} %, tol 1 %); mean |eps error| on {} biased records {before:.4} -> {after:.2e} (tol 0.005)",
            id.ua_ref,
            clean.len(),
            ua_err * 100.0,
            biased.len()
        ),
    )
}

fn gbt_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let ys = xs
        .iter()
        .map(|x| x[0].sin() + 0.5 * x[1] * x[2] - x[3].abs() + rng.gen_range(-0.1..0.1))
        .collect();
    (xs, ys)
}

fn gbt_correctness() -> Outcome {
    let max_depth = 4;
    let hp = GbtHyperparams::new(60, max_depth, 0.1).unwrap();
    let mut monotone = true;
    let mut depth = 0;
    let mut identical = true;
    for seed in 0..5 {
        let (xs, ys) = gbt_dataset(seed);
        let model = regressor::fit(&xs, &ys, hp, seed).unwrap();
        let mse = model.staged_mse(&xs, &ys);
        monotone &= mse.windows(2).all(|w| w[1] <= w[0]);
        depth = depth.max(model.max_tree_depth());
        let back = GbtModel::from_text(&model.to_text()).unwrap();
        let (probe, _) = gbt_dataset(100 + seed);
        identical &= probe[..100]
            .iter()
            .all(|x| model.predict(x).unwrap().to_bits() == back.predict(x).unwrap().to_bits());
    }
    outcome(
        monotone && depth <= max_depth && identical,
        format!("5 datasets: MSE non-increasing {monotone}, max depth {depth} (limit {max_depth}), round trip bit-identical {identical}"),
    )
}

fn metrics_exactness() -> Outcome {
    let y = [3.0, 5.0, 7.5, 1.0];
    let perfect = metrics::compute(&y, &y).unwrap();
    let perfect_ok = perfect.nmbe == 0.0 && perfect.cvrmse == 0.0 && perfect.r2 == Some(1.0);
    let half = metrics::compute(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
    let half_ok = half.cvrmse == 50.0 && half.nmbe == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let m: Vec<f64> = (0..500).map(|_| rng.gen_range(5.0..15.0)).collect();
    let p: Vec<f64> = m.iter().map(|v| v + rng.gen_range(-0.5..0.7)).collect();
    let ba = metrics::bland_altman(&m, &p).unwrap();
    let d: Vec<f64> = m.iter().zip(&p).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let sigma = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64).sqrt();
    let ba_err = (ba.lower_limit - (mean - 1.96 * sigma))
        .abs()
        .max((ba.upper_limit - (mean + 1.96 * sigma)).abs());
    outcome(
        perfect_ok && half_ok && ba_err <= 1e-12,
        format!(
            "perfect fit exact {perfect_ok}, CVRMSE([2,2],[1,3]) = {} %, Bland-Altman limit error {ba_err:.1e}",
            half.cvrmse
        ),
    )
}

struct Season {
    cfg: RunConfig,
    synth: SynthConfig,
    data: synth::SynthDataset,
    plans: Vec<DayPlan>,
    t_synth: Duration,
    t_calibrate: Duration,
    t_optimize: Duration,
}

fn run_season(root: &std::path::Path) -> Season {
    let cfg = RunConfig {
        data_dir: root.join("data"),
        model_dir: root.join("models"),
        output_dir: root.join("out"),
        ..RunConfig::default()
    };
    let synth_cfg = SynthConfig::default();
    let t = Instant::now();
    workflow::cmd_synth(&synth_cfg, &cfg.data_dir).unwrap();
    workflow::cmd_ingest(&cfg).unwrap();
    let t_synth = t.elapsed();
    let t = Instant::now();
    workflow::cmd_calibrate(&cfg).unwrap();
    let t_calibrate = t.elapsed();
    let t = Instant::now();
    let plans = workflow::cmd_optimize(&cfg, None).unwrap().plans;
    let t_optimize = t.elapsed();
    Season {
        data: synth::generate(&synth_cfg).unwrap(),
        synth: synth_cfg,
        cfg,
        plans,
        t_synth,
        t_calibrate,
        t_optimize,
    }
}

fn rc_recovery(s: &Season) -> Outcome {
    let observed = workflow::load_observed(&s.cfg).unwrap();
    let (params, state0) = workflow::load_rc(s.cfg.model_dir.join(workflow::RC_STORE)).unwrap();
    let a = s.cfg.training_days * STEPS_PER_DAY;
    let b = a + 28 * STEPS_PER_DAY;
    let inputs: Vec<RcInputs> = observed[..b].iter().map(|o| o.rc_inputs()).collect();
    let pred = rcload::predict_series(&params, state0, &inputs, TIMESTEP_S).unwrap();
    let truth = &s.data.truth[..b];
    let t_true: Vec<f64> = truth[a..b].iter().map(|r| r.t_room).collect();
    let room = metrics::compute(&t_true, &pred.t_room[a..b]).unwrap();
    let mut worst_day: f64 = 0.0;
    for d in (a..b).step_by(STEPS_PER_DAY) {
        let e = d + STEPS_PER_DAY;
        let q_true: f64 = truth[d..e].iter().map(|r| r.q_delivered).sum();
        let q_pred: f64 = pred.q_required[d..e].iter().sum();
        worst_day = worst_day.max((q_pred - q_true).abs() / q_true);
    }
    outcome(
        room.cvrmse < 1.0 && worst_day < 0.02,
        format!(
            "28-day holdout: room CVRMSE {:.3} % (tol 1 %), worst daily cumulative load error {:.3} % (tol 2 %)",
            room.cvrmse,
            worst_day * 100.0
        ),
    )
}

fn optimizer_oracle(s: &Season) -> Outcome {
    let loaded = workflow::load_models(&s.cfg).unwrap();
    let observed = workflow::load_observed(&s.cfg).unwrap();
    let days = workflow::day_contexts(&s.cfg, &observed, &loaded, None).unwrap();
    let opts = OptimizeOptions::default();
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let mut certified = true;
    for ctx in &days[..20] {
        let plan = optimizer::optimize_charging_temperature(ctx, &opts).unwrap();
        match (plan.feasible, optimizer::grid_search(ctx, &opts).unwrap()) {
            (true, Some(t)) => worst = worst.max((plan.t_charge_star - t).abs()),
            (false, None) => {}
            _ => mismatched += 1,
        }
        if plan.feasible {
            let p = plan.peak_step.unwrap();
            let e = plan.end_step.unwrap();
            let t_out_peak = plan.t_tes_out[p];
            let (first, _) = plan.demand.window.unwrap();
            let q_cum: f64 = plan.demand.q_building[first..=e].iter().sum::<f64>() * TIMESTEP_S / 3600.0;
            let hours = (e + 1 - first) as f64 * TIMESTEP_S / 3600.0;
            let rise = q_cum / s.cfg.tes.kwh_per_kelvin();
            let t_out_end = loaded
                .models
                .curves
                .end_raw(plan.t_charge_star + rise, rise, q_cum / hours);
            certified &= t_out_peak == plan.t_out_peak
                && t_out_peak <= plan.demand.t_limit[p]
                && (t_out_end - plan.t_out_end).abs() < 1e-9
                && t_out_end <= plan.demand.t_limit[e].min(s.cfg.tes.t_discharge_limit);
        }
    }
    outcome(
        worst <= 0.05 + 1e-9 && mismatched == 0 && certified,
        format!("20 days: max |bisection - grid| {worst:.3} °C (tol 0.05), feasibility mismatches {mismatched}, certificates hold {certified}"),
    )
}

fn season_pattern(s: &Season) -> Outcome {
    let baseline = s.cfg.baseline_degc;
    let feasible: Vec<&DayPlan> = s.plans.iter().filter(|p| p.feasible).collect();
    let all_above = !feasible.is_empty() && feasible.iter().all(|p| p.t_charge_star > baseline);
    let mean_margin = feasible.iter().map(|p| p.t_charge_star - baseline).sum::<f64>() / feasible.len() as f64;

    let mut order: Vec<usize> = (0..s.plans.len()).collect();
    order.sort_by(|&a, &b| s.plans[a].daily_load_kwh.total_cmp(&s.plans[b].daily_load_kwh));
    let decile = s.plans.len().div_ceil(10);
    let margin_of = |idx: &[usize]| {
        let m: Vec<f64> = idx.iter().filter_map(|&i| s.plans[i].margin(baseline)).collect();
        m.iter().sum::<f64>() / m.len().max(1) as f64
    };
    let low = margin_of(&order[..decile]);
    let high = margin_of(&order[order.len() - decile..]);

    let collapsed: Vec<usize> = s
        .data
        .tes_daily
        .iter()
        .enumerate()
        .filter(|(_, r)| r.collapsed)
        .map(|(i, _)| i)
        .collect();
    let top: Vec<usize> = order[order.len() - decile..].to_vec();
    let in_top = collapsed.iter().filter(|i| top.contains(i)).count();
    let concentrated = !collapsed.is_empty() && 2 * in_top > collapsed.len();

    outcome(
        all_above && mean_margin > 0.0 && low > high && concentrated,
        format!(
            "(a) {}/{} feasible days above {baseline} °C, mean margin {mean_margin:+.2} K; (b) low-decile margin {low:.2} K > high-decile {high:.2} K; (c) {in_top}/{} collapse days in the top load decile",
            feasible.iter().filter(|p| p.t_charge_star > baseline).count(),
            s.plans.len(),
            collapsed.len()
        ),
    )
}

fn main() {
    let mut ok = true;
    ok &= report(
        1,
        "psychrometric exactness",
        Some(Duration::from_secs(1)),
        psychrometrics,
    );
    ok &= report(2, "tank energy conservation", Some(Duration::from_secs(5)), tank_energy);
    ok &= report(
        3,
        "coil limit-temperature round trip",
        Some(Duration::from_secs(10)),
        coil_round_trip,
    );
    ok &= report(4, "UA identification and residual correction", None, ua_identification);

    let dir = tempfile::tempdir().unwrap();
    let season = run_season(dir.path());
    assert_eq!(season.plans.len(), season.synth.days);

    ok &= report(5, "load model recovery", None, || rc_recovery(&season));
    ok &= report(6, "boosted tree correctness", None, gbt_correctness);
    ok &= report(7, "optimizer vs exhaustive grid", None, || optimizer_oracle(&season));
    ok &= report(8, "qualitative season pattern", None, || season_pattern(&season));
    ok &= report(9, "metrics exactness", None, metrics_exactness);
    ok &= report(10, "end-to-end runtime", None, || {
        let total = season.t_synth + season.t_calibrate + season.t_optimize;
        outcome(
            total < Duration::from_secs(300) && season.t_optimize < Duration::from_secs(60),
            format!(
                "synth+ingest {:.2} s, calibrate {:.2} s, optimize {:.2} s (limit 60 s), total {:.2} s (limit 300 s)",
                season.t_synth.as_secs_f64(),
                season.t_calibrate.as_secs_f64(),
                season.t_optimize.as_secs_f64(),
                total.as_secs_f64()
            ),
        )
    });
    if !ok {
        std::process::exit(1);
    }
}
