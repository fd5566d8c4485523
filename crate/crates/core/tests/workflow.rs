use std::fs;
use std::path::Path;

use chargeopt::ingest::synth::{self, SynthConfig};
use chargeopt::metrics;
use chargeopt::workflow::{self, RunConfig};
use chargeopt::Error;

fn config(root: &Path) -> RunConfig {
    RunConfig {
        data_dir: root.join("data"),
        model_dir: root.join("models"),
        output_dir: root.join("out"),
        ..RunConfig::default()
    }
}

fn short(days: usize) -> SynthConfig {
    SynthConfig {
        days,
        ..SynthConfig::default()
    }
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = workflow::cmd_synth(&short(3), a.path()).unwrap();
    let mb = workflow::cmd_synth(&short(3), b.path()).unwrap();
    assert_eq!(ma, mb);
    for f in &ma.files {
        assert_eq!(
            fs::read(a.path().join(&f.file)).unwrap(),
            fs::read(b.path().join(&f.file)).unwrap()
        );
    }
    let other = workflow::cmd_synth(&SynthConfig { seed: 7, ..short(3) }, b.path()).unwrap();
    assert_ne!(other.files, ma.files);
}

#[test]
fn zero_days_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(workflow::cmd_synth(&short(0), dir.path()).is_err());
}

#[test]
fn default_season_has_one_tank_row_per_day() {
    let data = synth::generate(&SynthConfig::default()).unwrap();
    assert_eq!(data.tes_daily.len(), 62);
    assert_eq!(data.truth.len(), 62 * chargeopt::STEPS_PER_DAY);
    assert!(data.tes_daily.iter().all(|d| !d.incomplete));
}

#[test]
fn short_dataset_names_the_load_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    workflow::cmd_synth(&short(3), &cfg.data_dir).unwrap();
    workflow::cmd_ingest(&cfg).unwrap();
    let err = workflow::cmd_calibrate(&cfg).unwrap_err();
    assert!(matches!(err, Error::Calibration(_)));
    assert!(err.to_string().contains("rcload"), "{err}");
}

#[test]
fn calibrate_before_ingest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    workflow::cmd_synth(&short(2), &cfg.data_dir).unwrap();
    let err = workflow::cmd_calibrate(&cfg).unwrap_err();
    assert!(!err.is_model_store());
    assert!(err.to_string().contains("ingest"), "{err}");
}

#[test]
fn cumulative_agreement_exceeds_instantaneous_on_oscillation() {
    let n = 2000;
    let measured: Vec<f64> = (0..n).map(|k| 100.0 + 40.0 * (k as f64 * 0.7).sin()).collect();
    let predicted: Vec<f64> = (0..n).map(|k| 100.0 + 40.0 * (k as f64 * 0.7 + 1.2).sin()).collect();
    let inst = metrics::compute(&measured, &predicted).unwrap().r2.unwrap();
    let cum = metrics::cumulative_compare(&measured, &predicted).unwrap().r2.unwrap();
    assert!(inst < 0.5, "{inst}");
    assert!(cum > 0.99, "{cum}");
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    workflow::cmd_synth(&SynthConfig::default(), &cfg.data_dir).unwrap();
    let ingest = workflow::cmd_ingest(&cfg).unwrap();
    assert_eq!(ingest.bins, 62 * chargeopt::STEPS_PER_DAY);
    assert_eq!(ingest.rejected_rows, 0);
    assert_eq!(ingest.tank_days, Some(62));

    let cal = workflow::cmd_calibrate(&cfg).unwrap();
    assert!(cal.rc_holdout_room.unwrap().cvrmse < 1.0);
    assert!(cal.tes.peak_monotone);
    let loaded = workflow::load_models(&cfg).unwrap();
    assert_eq!(loaded.models.rc, cal.rc.params);

    let val = workflow::cmd_validate(&cfg).unwrap();
    assert_eq!(val.weeks, 4);
    let weekly = val
        .rows
        .iter()
        .filter(|r| r.label.starts_with("week") && r.label.ends_with("room temperature"));
    assert_eq!(weekly.count(), 4);

    let first = workflow::cmd_optimize(&cfg, None).unwrap();
    assert_eq!(first.plans.len(), 62);
    assert_eq!(first.report.infeasible_days, 0);
    assert!(first.plans.iter().all(|p| p.certificate_holds(&cfg.tes)));
    let report = fs::read(cfg.output_dir.join(workflow::SEASON_REPORT_FILE)).unwrap();
    workflow::cmd_optimize(&cfg, None).unwrap();
    assert_eq!(
        fs::read(cfg.output_dir.join(workflow::SEASON_REPORT_FILE)).unwrap(),
        report
    );

    let from = first.plans[3].start.date();
    let one = workflow::cmd_optimize(&cfg, Some((from, from))).unwrap();
    assert_eq!(one.plans.len(), 1);
    assert_eq!(one.plans[0].t_charge_star, first.plans[3].t_charge_star);

    assert!(workflow::cmd_report(&cfg).unwrap().contains("mean margin"));

    let mut files = vec![];
    for d in [
        &cfg.data_dir,
        &cfg.model_dir,
        &cfg.output_dir,
        &cfg.output_dir.join(workflow::PLANS_DIR),
    ] {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                files.push(p);
            }
        }
    }
    assert!(files.len() > 62 + 15);
    for f in &files {
        if let Err(e) = workflow::cmd_schema_check(f) {
            panic!("{}: {e}", f.display());
        }
    }

    fs::remove_file(cfg.model_dir.join(workflow::COIL_STORE)).unwrap();
    let err = workflow::cmd_optimize(&cfg, None).unwrap_err();
    assert!(err.is_model_store());
    assert!(err.to_string().contains(workflow::COIL_STORE), "{err}");
}
