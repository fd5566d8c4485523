use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chargeopt::workflow::RunConfig;

fn chargeopt(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chargeopt"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("CHARGEOPT_CONFIG")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(root: &Path, edit: impl FnOnce(&mut RunConfig)) -> PathBuf {
    let mut cfg = RunConfig {
        data_dir: "data".into(),
        model_dir: "models".into(),
        output_dir: "out".into(),
        ..RunConfig::default()
    };
    edit(&mut cfg);
    let path = root.join("run.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn short_season_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |_| {});

    let o = chargeopt(&cfg, &["synth", "--days", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("data/manifest.toml").exists());

    let o = chargeopt(&cfg, &["optimize"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(code(&chargeopt(&cfg, &["ingest"])), 0);
    let o = chargeopt(&cfg, &["calibrate"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rcload"));

    let manifest = dir.path().join("data/manifest.toml");
    let o = chargeopt(&cfg, &["schema-check", manifest.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let bogus = dir.path().join("bogus.csv");
    fs::write(&bogus, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&chargeopt(&cfg, &["schema-check", bogus.to_str().unwrap()])), 3);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "tolerance_degc = 0.05\ntolerence = 1\n").unwrap();
    let o = chargeopt(&path, &["report"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerence"));
}

#[test]
fn full_season_and_infeasible_tank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |_| {});
    for cmd in ["synth", "ingest", "calibrate", "validate", "optimize", "report"] {
        let o = chargeopt(&cfg, &[cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let report = dir.path().join("out/season_report.csv");
    assert!(report.exists());

    let o = chargeopt(&cfg, &["optimize", "--from", "2024-07-05", "--to", "2024-07-06"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("2 days"));

    let small = write_config(dir.path(), |c| {
        c.tes.volume_m3 = 20.0;
        c.tes.mass_kg = 20.0 * 997.0;
    });
    let o = chargeopt(&small, &["optimize"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}
