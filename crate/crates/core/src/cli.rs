//! Batch front end: load a scenario, run one or all modes, write traces,
//! summaries, event logs and the comparison table.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::{run_with_arrivals, EngineOptions, FollowerIntegration, RunMode, SimError, SimRun};
use crate::metrics::{compare, summarize, RunSummary};
use crate::scenario::{generate_arrivals, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
/// A run aborted, violated a constraint, or could not plan.
pub const EXIT_RUN_FAILED: i32 = 1;
/// The configuration could not be read or is invalid.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "platoon-merge", version, about = "Platoon merge simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario in one or all modes.
    Run(RunArgs),
    /// Print the built-in default scenario as TOML.
    DefaultConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Baseline1,
    Baseline2,
    Optimal,
    All,
}

impl ModeArg {
    pub fn modes(self) -> Vec<RunMode> {
        match self {
            ModeArg::Baseline1 => vec![RunMode::Baseline1],
            ModeArg::Baseline2 => vec![RunMode::Baseline2],
            ModeArg::Optimal => vec![RunMode::Optimal],
            ModeArg::All => RunMode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: ModeArg,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report constraint violations instead of aborting at the first one.
    #[arg(long)]
    pub audit_only: bool,
    /// Write the per-step trace CSV.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub emit_trace: bool,
    /// Integrate followers numerically instead of evaluating the leader's plan.
    #[arg(long)]
    pub euler_followers: bool,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub dt_sim: Option<f64>,
    #[arg(long)]
    pub main_volume: Option<f64>,
    #[arg(long)]
    pub ramp_volume: Option<f64>,
}

impl RunArgs {
    fn apply_overrides(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
        if let Some(tau) = self.tau_max {
            config.tau_max = tau;
            config.tau_min = config.tau_min.min(tau);
        }
        if let Some(dt) = self.dt_sim {
            config.dt_sim = dt;
        }
        if let Some(v) = self.main_volume {
            config.main_volume = v;
        }
        if let Some(v) = self.ramp_volume {
            config.ramp_volume = v;
        }
    }
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match execute(&args) {
            Ok(outcome) => outcome.exit_code,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_RUN_FAILED
            }
        },
        Command::DefaultConfig => {
            say(&ScenarioConfig::default().to_toml_string());
            EXIT_OK
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summaries: BTreeMap<RunMode, RunSummary>,
    pub comparison: Option<String>,
}

#[derive(Serialize)]
struct ConfigErrorReport<'a> {
    error: &'static str,
    config: &'a Path,
    message: String,
}

/// Run the requested modes and write their outputs to `out_dir`.
pub fn execute(args: &RunArgs) -> Result<Outcome> {
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let config = ScenarioConfig::load(&args.config).and_then(|mut c| {
        args.apply_overrides(&mut c);
        c.validate()?;
        Ok(c)
    });
    let arrivals = config.and_then(|c| generate_arrivals(&c).map(|a| (c, a)));
    let (config, arrivals) = match arrivals {
        Ok(x) => x,
        Err(e) => {
            eprintln!("config error: {e}");
            let report = ConfigErrorReport { error: "config", config: &args.config, message: e.to_string() };
            write_json(&args.out_dir.join("error.json"), &report)?;
            return Ok(Outcome { exit_code: EXIT_CONFIG, summaries: BTreeMap::new(), comparison: None });
        }
    };

    let options = EngineOptions {
        audit_only: args.audit_only,
        follower_integration: if args.euler_followers {
            FollowerIntegration::Euler
        } else {
            FollowerIntegration::Exact
        },
    };
    let modes = args.mode.modes();
    let results: Vec<(RunMode, Result<SimRun, SimError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&mode| {
                let (config, arrivals) = (&config, arrivals.clone());
                scope.spawn(move || (mode, run_with_arrivals(config, mode, &options, arrivals)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut exit_code = EXIT_OK;
    let mut summaries = BTreeMap::new();
    for (mode, result) in results {
        let dir = &args.out_dir;
        match result {
            Ok(run) => {
                let summary = summarize(&run);
                write_json(&dir.join(format!("summary_{mode}.json")), &summary)?;
                write_json(&dir.join(format!("events_{mode}.json")), &run.trace.events)?;
                if args.emit_trace {
                    let path = dir.join(format!("trace_{mode}.csv"));
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    run.trace.write_csv(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
                }
                if !run.violations.is_empty() {
                    eprintln!("{mode}: {} constraint violation(s)", run.violations.len());
                    let report = serde_json::json!({ "error": "constraint_violation", "violations": run.violations });
                    write_json(&dir.join(format!("violations_{mode}.json")), &report)?;
                    exit_code = EXIT_RUN_FAILED;
                }
                say(&format!(
                    "{mode}: {} vehicles completed, avg travel time {:.2} s, avg fuel {:.2} mL\n",
                    summary.vehicles_completed, summary.avg_travel_time, summary.avg_fuel_ml
                ));
                summaries.insert(mode, summary);
            }
            Err(e) => {
                eprintln!("{mode}: {e}");
                let name = match e {
                    SimError::ConstraintViolation { .. } => format!("violations_{mode}.json"),
                    _ => format!("error_{mode}.json"),
                };
                write_json(&dir.join(name), &e.to_json())?;
                exit_code = EXIT_RUN_FAILED;
            }
        }
    }

    let mut comparison = None;
    if summaries.len() == RunMode::ALL.len() {
        let table = compare(&summaries)?.render();
        fs::write(args.out_dir.join("comparison.txt"), &table)?;
        say(&table);
        comparison = Some(table);
    }
    Ok(Outcome { exit_code, summaries, comparison })
}

/// Print to stdout, ignoring a closed pipe.
fn say(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
