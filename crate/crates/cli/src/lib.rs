//! The `sonic` command-line tool.
//!
//! ```text
//! sonic <SUBCOMMAND> <CONFIG.toml> [--out DIR]
//! ```
//!
//! Every run writes its artifacts and a `manifest.json` (config, version,
//! wall time, SHA-256 of each file) into one directory. Exit codes: 0 on
//! success, 1 on invalid arguments or configuration, 2 when a solver or
//! file operation fails.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{CliError, Command};
use config::{parse_config, RunConfig};
use output::{Artifacts, RunManifest};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SONIC_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "sonic-out";

#[derive(Debug, Parser)]
#[command(name = "sonic", version, about = "Transonic profiles, degenerate mixed-type solvers and shock polars")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Critical trajectories in the (u, E) plane.
    PhasePortrait(RunArgs),
    /// Integrate a profile and check its structural claims.
    Profile(RunArgs),
    /// Sign condition on the normalized coefficients along a profile.
    KzCheck(RunArgs),
    /// Solve the degenerate Keldysh-type model and scan second derivatives.
    KeldyshSolve(RunArgs),
    /// Solve the linear mixed-type problem on a channel.
    MixedSolve(RunArgs),
    /// Sample a shock polar and locate the detachment and sonic angles.
    ShockPolar(RunArgs),
    /// Pseudo-sonic circle and local coordinates near it.
    Geometry(RunArgs),
    /// Run several configs in parallel.
    Sweep(RunArgs),
}

impl Sub {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::PhasePortrait(a) => (Command::PhasePortrait, a),
            Sub::Profile(a) => (Command::Profile, a),
            Sub::KzCheck(a) => (Command::KzCheck, a),
            Sub::KeldyshSolve(a) => (Command::KeldyshSolve, a),
            Sub::MixedSolve(a) => (Command::MixedSolve, a),
            Sub::ShockPolar(a) => (Command::ShockPolar, a),
            Sub::Geometry(a) => (Command::Geometry, a),
            Sub::Sweep(a) => (Command::Sweep, a),
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (cmd, a) = cli.command.split();
    let outcome = match cmd {
        Command::Sweep => run_sweep(&a.config, a.out.as_deref()),
        _ => run_one(cmd, &a.config, a.out.as_deref()),
    };
    match outcome {
        Ok(o) => {
            println!("{}: {}", cmd.name(), o.summary);
            println!("artifacts in {}", o.dir.display());
            o.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Result of one run that got as far as an output directory.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub code: i32,
    pub summary: String,
}

fn load(path: &Path) -> Result<(String, RunConfig), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(CliError::Validation)?;
    Ok((text, cfg))
}

/// Output directory: `--out`, then `output_dir` (relative to the config
/// file), then `$SONIC_OUTPUT_ROOT/<name or file stem>/<subcommand>`.
pub fn resolve_output_dir(cmd: Command, config_path: &Path, cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let base = config_path.parent().unwrap_or(Path::new(""));
    if let Some(d) = &cfg.output_dir {
        return base.join(d);
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
    let stem = match &cfg.name {
        Some(n) => n.clone(),
        None => config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned()),
    };
    root.join(stem).join(cmd.name())
}

fn manifest(cmd: Command, path: &Path, text: &str, start: Instant, code: i32) -> RunManifest {
    RunManifest {
        tool: "sonic".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config_path: Some(path.display().to_string()),
        config: text.into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        exit_code: code,
        files: Vec::new(),
    }
}

/// Runs one non-sweep subcommand. Errors before an output directory exists
/// are returned as `Err`; later failures are recorded in the manifest.
pub fn run_one(cmd: Command, config_path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (text, cfg) = load(config_path)?;
    let dir = resolve_output_dir(cmd, config_path, &cfg, out);
    let job = commands::plan(cmd, &cfg);
    let mut art = Artifacts::create(&dir, cfg.output)?;
    let result = job.and_then(|j| commands::execute(&j, &mut art));
    let code = result.as_ref().map_or_else(CliError::exit_code, |_| 0);
    art.finish(manifest(cmd, config_path, &text, start, code))?;
    match result {
        Ok(summary) => Ok(Outcome { dir, code, summary }),
        Err(e) => {
            eprintln!("error: {}", e.message());
            Ok(Outcome { dir, code, summary: format!("failed (exit {code})") })
        }
    }
}

fn run_sweep(config_path: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (text, cfg) = load(config_path)?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Validation("sweep needs a [sweep] section".into()))?;
    if sweep.runs.iter().any(|r| r.command == Command::Sweep) {
        return Err(CliError::Validation("sweeps cannot be nested".into()));
    }
    if sweep.threads == Some(0) {
        return Err(CliError::Validation("sweep.threads must be >= 1".into()));
    }
    let dir = resolve_output_dir(Command::Sweep, config_path, &cfg, out);
    let base = config_path.parent().unwrap_or(Path::new(""));
    let jobs: Vec<(Command, PathBuf, PathBuf)> = sweep
        .runs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let stem = r.config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            (r.command, base.join(&r.config), dir.join(format!("{k:03}-{}-{stem}", r.command.name())))
        })
        .collect();
    let threads = sweep
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .min(jobs.len().max(1));

    let mut results: Vec<Option<(i32, String)>> = vec![None; jobs.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let collected = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((cmd, cfg_path, child)) = jobs.get(k) else { break };
                let r = match run_one(*cmd, cfg_path, Some(child)) {
                    Ok(o) => (o.code, o.summary),
                    Err(e) => (e.exit_code(), e.message().to_string()),
                };
                collected.lock().expect("sweep results lock")[k] = Some(r);
            });
        }
    });

    let mut art = Artifacts::create(&dir, cfg.output)?;
    let children: Vec<_> = jobs
        .iter()
        .zip(&results)
        .map(|((cmd, cfg_path, child), r)| {
            let (code, summary) = r.clone().unwrap_or((2, "not run".into()));
            json!({
                "command": cmd.name(),
                "config": cfg_path.display().to_string(),
                "output": child.strip_prefix(&dir).unwrap_or(child).display().to_string(),
                "exit_code": code,
                "summary": summary,
            })
        })
        .collect();
    let code = results.iter().map(|r| r.as_ref().map_or(2, |x| x.0)).max().unwrap_or(0);
    art.json("summary.json", &json!({ "runs": children, "exit_code": code }))?;
    art.finish(manifest(Command::Sweep, config_path, &text, start, code))?;
    let failed = results.iter().filter(|r| r.as_ref().is_none_or(|x| x.0 != 0)).count();
    Ok(Outcome { dir, code, summary: format!("{} runs, {failed} failed", jobs.len()) })
}
