//! `ksfluid`: run the Kirkwood–Salsburg solver, its derivative and the
//! brute-force oracle from a JSON configuration.
//!
//! ```text
//! ksfluid check       --config run.json
//! ksfluid solve       --config run.json --out results/
//! ksfluid derivative  --config run.json --out results/ --seed 7
//! ksfluid limit-sweep --config run.json
//! ksfluid oracle      --config run.json --threads 4
//! ```
//!
//! Exit status is 0 on success, 1 when a gate or a numerical step fails and
//! 2 when the configuration is unusable.

mod commands;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ksfluid::config::RunConfig;
use serde_json::{json, Map};

use commands::Context;
use error::{at_load, CliError};
use output::{sha256_hex, RunDir};

#[derive(Parser, Debug)]
#[command(
    name = "ksfluid",
    version,
    about = "Grand-canonical distribution functions from the Kirkwood-Salsburg hierarchy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the library's parallel loops.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Run even if the potential or the activity fails its gate.
    #[arg(long, global = true)]
    override_admissibility: bool,

    /// Seed for randomized sampling (certificates, remainder probes).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Admissibility, c_β and the activity bound.
    Check,
    /// Solve for ρ^(1..m_max).
    Solve,
    /// Derivative of ρ along the configured perturbation, with FD and remainder studies.
    Derivative,
    /// Compare nested boxes against the largest one.
    LimitSweep,
    /// Brute-force grand-canonical sums and explicit derivatives.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Solve => "solve",
            Self::Derivative => "derivative",
            Self::LimitSweep => "limit-sweep",
            Self::Oracle => "oracle",
        }
    }
}

fn load(path: &Path) -> Result<(RunConfig, String), CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(at_load)?;
    let canonical = cfg.canonical_json().map_err(at_load)?;
    let hash = sha256_hex(canonical.as_bytes());
    Ok((cfg, hash))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let (cfg, config_sha256) = load(&path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let res = cfg.resolve(&base).map_err(at_load)?;
    let dir = commands::output_dir(cli.out, &cfg, &base);
    let out = RunDir::create(&dir, &cfg.outputs.formats)?;
    let mut ctx = Context {
        command: cli.command.name(),
        cfg,
        config_sha256,
        res,
        override_gate: cli.override_admissibility,
        seed: cli.seed,
        out,
        bounds: Map::new(),
    };
    let result = match cli.command {
        Command::Check => commands::check(&mut ctx),
        Command::Solve => commands::solve(&mut ctx),
        Command::Derivative => commands::derivative(&mut ctx),
        Command::LimitSweep => commands::limit_sweep_cmd(&mut ctx),
        Command::Oracle => commands::oracle(&mut ctx),
    };
    let status = match &result {
        Ok(()) => "ok",
        Err(CliError::Refused(_)) => "refused",
        Err(e) if e.exit_code() == 2 => "config-error",
        Err(_) => "failed",
    };
    if let Err(e) = &result {
        ctx.out
            .write_json("error.json", &json!({ "command": ctx.command, "error": e.to_string() }))?;
    }
    ctx.write_manifest(status)?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
