//! Command-line front end.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::amc::{build_mode_table, QamSpec};
use crate::channel::{sample_states, FadingState, SampleSet};
use crate::costreward::{build_envelope, Envelope};
use crate::error::{Error, Result};
use crate::experiments::{
    power_savings, solve_constraint, trace_region, write_region_csv, write_savings_csv, Solution,
    DEFAULT_DIRECTIONS,
};
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "tdma-energy",
    version,
    about = "Energy-minimal TDMA rate and time allocation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Caps worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; payloads go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-state envelope dump for explicit gains.
    Envelope {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated normalized gains, one per user.
        #[arg(long, value_delimiter = ',', required = true)]
        gains: Vec<f64>,
        /// Points in the dense `(R, J(R))` sampling.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Solves the configured constraint.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Traces the two-user power region.
    Region {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIRECTIONS)]
        directions: usize,
    },
    /// Savings of the optimal policy over the equal-time baselines.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated cost-weight ratios `μ₁/μ₂`.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
        ratios: Vec<f64>,
    },
    /// QAM mode table.
    Modes {
        #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
        constellations: Vec<u32>,
        #[arg(long, default_value_t = 1e-3)]
        sep: f64,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } | Error::RateAboveTable { .. } => EXIT_INFEASIBLE,
        Error::NoConvergence { .. } | Error::BracketNotFound { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parses arguments, runs one command and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            log::warn!("thread cap ignored: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path, global: &GlobalArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(n) = global.samples {
        cfg.samples = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn draw(cfg: &ExperimentConfig) -> Result<SampleSet> {
    sample_states(&cfg.channel()?, cfg.samples, cfg.seed)
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("output: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("payloads always serialize");
    s.push('\n');
    s
}

/// Writes `name` under the output directory, or to stdout without one.
fn emit(global: &GlobalArgs, name: &str, payload: &[u8]) -> Result<()> {
    match &global.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err)?;
            fs::write(dir.join(name), payload).map_err(io_err)
        }
        None => std::io::stdout().write_all(payload).map_err(io_err),
    }
}

/// The manifest goes next to the payloads, or to stderr without an output directory.
fn emit_manifest(global: &GlobalArgs, manifest: Value) -> Result<()> {
    let text = to_json(&manifest);
    match &global.out {
        Some(_) => emit(global, "manifest.json", text.as_bytes()),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn manifest(command: &str, cfg: &ExperimentConfig, started: Instant, extra: Value) -> Value {
    json!({
        "command": command,
        "seed": cfg.seed,
        "samples": cfg.samples,
        "tolerances": cfg.tolerances,
        "config": cfg,
        "parameters": extra,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
    })
}

pub fn run(cli: &Cli) -> Result<i32> {
    let started = Instant::now();
    let g = &cli.global;
    match &cli.command {
        Command::Envelope {
            config,
            gains,
            points,
        } => {
            let cfg = load(config, g)?;
            let profiles = cfg.profiles()?;
            let state = FadingState::new(gains.clone())?;
            let env = build_envelope(&profiles, &state)?;
            let top = match &env {
                Envelope::Continuous(c) => c.rb.last().map_or(8.0 * c.users[0].w, |r| 1.5 * r),
                Envelope::PiecewiseLinear(p) => p.max_reward(),
            };
            let n = (*points).max(2);
            let curve: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    let r = top * i as f64 / (n - 1) as f64;
                    [r, env.eval(r)]
                })
                .collect();
            emit(
                g,
                "envelope.json",
                to_json(&json!({ "gains": gains, "envelope": env, "curve": curve })).as_bytes(),
            )?;
            Ok(EXIT_OK)
        }
        Command::Solve { config } => {
            let cfg = load(config, g)?;
            let sample = draw(&cfg)?;
            let sol = solve_constraint(
                &cfg.profiles()?,
                &sample,
                &cfg.constraint(),
                &cfg.tolerances,
            )?;
            let watts = cfg
                .watts_per_unit()
                .map(|f| sol.avg_power().iter().map(|p| p * f).collect::<Vec<_>>());
            let converged = sol.converged();
            let payload =
                json!({ "converged": converged, "solution": sol, "avg_power_watts": watts });
            emit(g, "solution.json", to_json(&payload).as_bytes())?;
            emit_manifest(g, manifest("solve", &cfg, started, Value::Null))?;
            if let Solution::Individual(s) = &sol {
                if !s.converged {
                    eprintln!(
                        "error: level sweeps did not converge after {} sweeps",
                        s.iterations
                    );
                    return Ok(EXIT_NO_CONVERGENCE);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Region { config, directions } => {
            let cfg = load(config, g)?;
            let sample = draw(&cfg)?;
            let pts = trace_region(
                &cfg.profiles()?,
                &sample,
                &cfg.constraint(),
                *directions,
                &cfg.tolerances,
            )?;
            let mut buf = Vec::new();
            write_region_csv(&pts, &mut buf).map_err(io_err)?;
            emit(g, "region.csv", &buf)?;
            emit_manifest(
                g,
                manifest("region", &cfg, started, json!({ "directions": directions })),
            )?;
            Ok(EXIT_OK)
        }
        Command::Compare { config, ratios } => {
            let cfg = load(config, g)?;
            let sample = draw(&cfg)?;
            let rows = power_savings(
                &cfg.profiles()?,
                &sample,
                &cfg.constraint(),
                ratios,
                &cfg.tolerances,
            )?;
            let mut buf = Vec::new();
            write_savings_csv(&rows, &mut buf).map_err(io_err)?;
            emit(g, "savings.csv", &buf)?;
            emit_manifest(
                g,
                manifest("compare", &cfg, started, json!({ "ratios": ratios })),
            )?;
            Ok(EXIT_OK)
        }
        Command::Modes {
            constellations,
            sep,
        } => {
            let table = build_mode_table(&QamSpec {
                constellations: constellations.clone(),
                sep_target: *sep,
            })?;
            emit(g, "modes.json", to_json(&table).as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}
