//! `holoqutrit` command-line front end.
//!
//! Every run writes `manifest.json` into the output directory before doing any
//! work and marks it complete at the end, so an interrupted run is visible as
//! `"status": "incomplete"`.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::Run;
use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] holoqutrit::Error),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "holoqutrit", version, about = "Holonomic qutrit gate simulation and characterization")]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sample tomography readout with this many shots per setting.
    #[arg(long, global = true, conflicts_with = "exact_measurement")]
    shots: Option<u64>,
    /// Use exact expectation values (the default).
    #[arg(long, global = true)]
    exact_measurement: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthesize one gate and report its fidelity.
    Gate,
    /// Process tomography of the configured gate.
    Qpt,
    /// Reference and interleaved randomized benchmarking.
    Rb,
    /// Fidelity over amplitude error and detuning.
    Sweep,
    /// Encode, gate and decode through the storage cavity.
    Cavity,
    /// Fit calibration traces.
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gate => "gate",
            Command::Qpt => "qpt",
            Command::Rb => "rb",
            Command::Sweep => "sweep",
            Command::Cavity => "cavity",
            Command::Calibrate => "calibrate",
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::parse(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        None => Ok(Config::default()),
    }
}

fn write_manifest(out: &Path, m: &Value) -> Result<(), CliError> {
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config { path: "--threads".into(), msg: e.to_string() })?;
    }
    fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut manifest = json!({
        "tool": "holoqutrit",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config_hash": cfg.hash(),
        "seed": cli.seed,
        "shots": cli.shots,
        "started_unix_s": started,
        "status": "incomplete",
    });
    write_manifest(&cli.out, &manifest)?;
    let clock = Instant::now();
    let mut run = Run {
        cfg: &cfg,
        config_dir: commands::config_dir(cli.config.as_deref()),
        out: cli.out.clone(),
        seed: cli.seed,
        shots: cli.shots,
        artifacts: Vec::new(),
    };
    let result = match cli.command {
        Command::Gate => commands::gate(&mut run),
        Command::Qpt => commands::qpt(&mut run),
        Command::Rb => commands::rb(&mut run),
        Command::Sweep => commands::sweep(&mut run),
        Command::Cavity => commands::cavity(&mut run),
        Command::Calibrate => commands::calibrate(&mut run),
    };
    manifest["artifacts"] = json!(run.artifacts);
    match &result {
        Ok(()) => {
            manifest["status"] = json!("complete");
            manifest["wall_time_s"] = json!(clock.elapsed().as_secs_f64());
        }
        Err(e) => manifest["error"] = json!(e.to_string()),
    }
    write_manifest(&cli.out, &manifest)?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
