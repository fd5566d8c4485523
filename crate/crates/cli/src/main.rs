use std::path::PathBuf;
use std::process::ExitCode;

use chargeopt::ingest::synth::{self, SynthConfig};
use chargeopt::workflow::{self, RunConfig};
use chargeopt::Error;
use chrono::NaiveDate;
use clap::{Parser, Subcommand};

/// Day-ahead chilled-water storage charging temperature optimizer.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Run configuration (TOML). Falls back to $CHARGEOPT_CONFIG, then to
    /// built-in defaults with paths relative to the working directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic season with ground truth.
    Synth {
        /// Output directory (default: the configured data directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generator configuration (TOML, same layout as truth.toml).
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Override the number of days.
        #[arg(long)]
        days: Option<usize>,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Resample the 1-minute BAS log and rebuild daily tank aggregates.
    Ingest,
    /// Calibrate the load, humidity, coil and tank models.
    Calibrate,
    /// Score the calibrated models on the holdout period.
    Validate,
    /// Optimize the charging temperature for every day in range.
    Optimize {
        /// First day (YYYY-MM-DD), inclusive.
        #[arg(long)]
        from: Option<NaiveDate>,
        /// Last day (YYYY-MM-DD), inclusive.
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Print the season report and validation table.
    Report,
    /// Verify that a produced file matches its documented schema.
    SchemaCheck { files: Vec<PathBuf> },
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODEL_STORE: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_model_store() {
        EXIT_MODEL_STORE
    } else {
        EXIT_DATA
    }
}

fn load_config(path: Option<PathBuf>) -> Result<RunConfig, Error> {
    match path.or_else(|| std::env::var_os("CHARGEOPT_CONFIG").map(PathBuf::from)) {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let cfg = load_config(cli.config)?;
    match cli.command {
        Command::Synth {
            out,
            synth_config,
            days,
            seed,
        } => {
            let mut sc = match synth_config {
                Some(p) => synth::read_sidecar(p)?,
                None => SynthConfig::default(),
            };
            if let Some(d) = days {
                sc.days = d;
            }
            if let Some(s) = seed {
                sc.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.data_dir.clone());
            let manifest = workflow::cmd_synth(&sc, &dir)?;
            println!(
                "wrote {} days (seed {}) to {}",
                manifest.days,
                manifest.seed,
                dir.display()
            );
            for f in &manifest.files {
                println!("  {:<16} {:>10} bytes  sha256 {}", f.file, f.bytes, f.sha256);
            }
        }
        Command::Ingest => {
            let s = workflow::cmd_ingest(&cfg)?;
            println!(
                "{} minute rows ({} rejected) -> {} five-minute rows ({} partial)",
                s.minute_rows, s.rejected_rows, s.bins, s.partial_bins
            );
            if let Some(d) = s.tank_days {
                println!("{d} daily tank rows");
            }
        }
        Command::Calibrate => {
            let s = workflow::cmd_calibrate(&cfg)?;
            println!(
                "rcload    objective {:.5} ({} starts)",
                s.rc.objective,
                s.rc.start_objectives.len()
            );
            if let Some(m) = s.rc_holdout_room {
                println!("{}", m.table_line("  holdout room temperature"));
            }
            if let Some(m) = s.rc_holdout_load {
                println!("{}", m.table_line("  holdout load"));
            }
            println!("humidity  ensemble weight {:.1}", s.humidity_weight);
            println!(
                "coil      UA_ref {:.4} kW/K from {} rated records ({} flagged)",
                s.ua.ua_ref, s.rated_records, s.ua.flagged
            );
            println!(
                "tes       peak R2 {:.4}, end R2 {:.4}, peak curve monotone: {}",
                s.tes.peak.r2, s.tes.end.r2, s.tes.peak_monotone
            );
        }
        Command::Validate => {
            let s = workflow::cmd_validate(&cfg)?;
            for r in &s.rows {
                println!("{} [{}]", r.report.table_line(&r.label), r.kind);
            }
            println!(
                "tank peak outlet limits of agreement [{:.3}, {:.3}] °C, end [{:.3}, {:.3}] °C",
                s.peak.lower_limit, s.peak.upper_limit, s.end.lower_limit, s.end.upper_limit
            );
        }
        Command::Optimize { from, to } => {
            let range = match (from, to) {
                (None, None) => None,
                (f, t) => Some((f.unwrap_or(NaiveDate::MIN), t.unwrap_or(NaiveDate::MAX))),
            };
            let s = workflow::cmd_optimize(&cfg, range)?;
            println!("{}", s.report.summary_line());
            if s.report.infeasible_days > 0 {
                for r in s.report.rows.iter().filter(|r| !r.feasible) {
                    eprintln!("infeasible: {} ({})", r.label, r.limiting_constraint.as_str());
                }
                return Ok(EXIT_INFEASIBLE);
            }
        }
        Command::Report => println!("{}", workflow::cmd_report(&cfg)?),
        Command::SchemaCheck { files } => {
            if files.is_empty() {
                return Err(Error::InvalidInput("schema-check needs at least one file".into()));
            }
            for f in files {
                let c = workflow::cmd_schema_check(&f)?;
                println!("{}: {} ({} rows) ok", f.display(), c.schema, c.rows);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
