//! `transitory` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, Output};
use config::{Loaded, Overrides};
use table::{Meta, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Io(_) | CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<transitory_core::Error> for CliError {
    fn from(e: transitory_core::Error) -> Self {
        use transitory_core::Error as E;
        match &e {
            E::Precondition { message, threshold } => CliError::Precondition(match threshold {
                Some(t) => format!("{message} (threshold {})", table::fmt_float(*t)),
                None => message.clone(),
            }),
            E::RootNotFound { .. } => CliError::Precondition(e.to_string()),
            E::Domain(_) | E::Argument(_) | E::MgfDomain { .. } | E::Unsupported(_) => CliError::Config(e.to_string()),
            E::Numerical(_) => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "transitory", version, about = "Simulation and limit laws for transitory queues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Does not change any output.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Event-exact workload paths of the queue.
    Simulate,
    /// Fluid-limit workload.
    Fluid,
    /// Transient law of the reflected diffusion: closed form, quadrature, Monte Carlo.
    Transient,
    /// Tail asymptotics of the Gaussian workload maximum.
    Tail,
    /// Rate function, minimizer and rare-event path.
    Ldp,
    /// Rare-event path under the exponential twist.
    RarePath,
    /// Importance-sampling estimate of the overflow probability.
    IsEstimate,
    /// Periodic transient and steady-state laws.
    Periodic,
    /// Run the acceptance suite and write a JSON verdict.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fluid => "fluid",
            Command::Transient => "transient",
            Command::Tail => "tail",
            Command::Ldp => "ldp",
            Command::RarePath => "rare-path",
            Command::IsEstimate => "is-estimate",
            Command::Periodic => "periodic",
            Command::Validate => "validate",
        }
    }

    fn default_seed(self) -> u64 {
        match self {
            Command::Validate => transitory_core::validation::ValidationConfig::default().seed,
            _ => commands::DEFAULT_SEED,
        }
    }
}

fn execute<C>(cli: &Cli, env: Vec<(String, String)>, run: fn(&C, &Ctx) -> Result<Output, CliError>) -> Result<bool, CliError>
where
    C: serde::de::DeserializeOwned + serde::Serialize,
{
    let root = config::read_file(cli.config.as_deref())?;
    let flags = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out.clone(),
    };
    let Loaded {
        common,
        command,
        effective,
        hash,
    } = config::load::<C>(root, env, &flags)?;
    let seed = common.seed.unwrap_or(cli.command.default_seed());
    let ctx = Ctx {
        seed,
        workers: common.workers,
        config_hash: hash.clone(),
    };
    let start = Instant::now();
    let out = run(&command, &ctx)?;
    let elapsed = start.elapsed().as_secs_f64();

    let dir = &common.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let meta = Meta {
        command: cli.command.name().to_string(),
        seed,
        config_hash: hash.clone(),
    };
    let mut files = Vec::new();
    for (name, t) in &out.tables {
        t.write(dir, name, &meta)?;
        files.push(name.clone());
    }
    for (name, doc) in &out.documents {
        let text = serde_json::to_string_pretty(doc).expect("JSON documents serialize") + "\n";
        std::fs::write(dir.join(name), text).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        files.push(name.clone());
    }
    let manifest = json!({
        "version": VERSION,
        "command": meta.command,
        "seed": seed,
        "config_hash": hash,
        "config": effective,
        "workers": common.workers,
        "files": files,
        "wall_clock_seconds": elapsed,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(dir.join("run.json"), text).map_err(|e| CliError::Io(format!("run.json: {e}")))?;

    for line in &out.lines {
        println!("{line}");
    }
    for f in &files {
        println!("wrote {}", dir.join(f).display());
    }
    Ok(!out.failed)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, env: Vec<(String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate => execute(&cli, env, commands::simulate),
        Command::Fluid => execute(&cli, env, commands::fluid),
        Command::Transient => execute(&cli, env, commands::transient),
        Command::Tail => execute(&cli, env, commands::tail),
        Command::Ldp => execute(&cli, env, commands::ldp),
        Command::RarePath => execute(&cli, env, commands::rare_path),
        Command::IsEstimate => execute(&cli, env, commands::is),
        Command::Periodic => execute(&cli, env, commands::periodic),
        Command::Validate => execute(&cli, env, commands::validate),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
