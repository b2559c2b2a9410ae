mod cmd;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::cmd::{dispatch, replay, RunOutcome};
use crate::config::read_value;
use crate::error::{CliError, CliResult};
use crate::manifest::MANIFEST_NAME;

/// Flux-noise spectroscopy and flux-qubit rate calculations.
///
/// Each run reads a JSON config, writes its artifacts to `--out`, and records
/// a `manifest.json` from which `replay` regenerates them.
#[derive(Parser)]
#[command(name = "fluxnoise", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize flux-noise time series.
    Synth(RunArgs),
    /// Simulate single-shot detector records from flux series.
    Shots(RunArgs),
    /// Estimate flux spectra (periodogram or interleaved cross-spectrum).
    Estimate(RunArgs),
    /// Convert relaxation data to S+, S- and effective temperatures.
    Extract(RunArgs),
    /// Fit spectral models, optionally with parameters shared across groups.
    Fit(RunArgs),
    /// Sweep the barrier bias of the circuit model.
    Circuit(RunArgs),
    /// Tunneling-rate sweeps and linewidth predictions.
    Mrt(PresetArgs),
    /// Quasiparticle rates along a barrier sweep.
    Qp(PresetArgs),
    /// Regenerate the artifacts of a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// Overrides the base seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PresetArgs {
    /// JSON config; optional with `--preset`.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Named parameter set (`interpolated-spectrum` for mrt, `fitted-density` for qp).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory (default: the manifest's directory).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Fail unless every output matches the recorded digest.
    #[arg(long)]
    verify: bool,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> CliResult<RunOutcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("`--threads` must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let threads = cli.threads;
    let (name, a) = match cli.cmd {
        Cmd::Replay(r) => return replay(&r.manifest, r.out.as_deref(), threads, r.verify),
        Cmd::Mrt(p) => ("mrt", p),
        Cmd::Qp(p) => ("qp", p),
        Cmd::Synth(a) => return plain("synth", a, threads),
        Cmd::Shots(a) => return plain("shots", a, threads),
        Cmd::Estimate(a) => return plain("estimate", a, threads),
        Cmd::Extract(a) => return plain("extract", a, threads),
        Cmd::Fit(a) => return plain("fit", a, threads),
        Cmd::Circuit(a) => return plain("circuit", a, threads),
    };
    if a.config.is_none() && a.preset.is_none() {
        return Err(CliError::config(format!("{name} needs `--config` or `--preset`")));
    }
    let mut v = read_value(a.config.as_deref())?;
    if let Some(p) = a.preset {
        match &mut v {
            Value::Object(m) => {
                m.insert("preset".into(), Value::String(p));
            }
            _ => return Err(CliError::config("config must be a JSON object")),
        }
    }
    let base = a.config.as_deref().map(base_dir);
    dispatch(name, v, base.as_deref(), None, &a.out, threads)
}

fn plain(name: &str, a: RunArgs, threads: Option<usize>) -> CliResult<RunOutcome> {
    let v = read_value(Some(&a.config))?;
    dispatch(name, v, Some(&base_dir(&a.config)), a.seed, &a.out, threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            println!("manifest: {MANIFEST_NAME}, outputs: {}", o.manifest.outputs.len());
            match o.nonconverged {
                Some(msg) => {
                    eprintln!("{}", CliError::numerical(msg));
                    ExitCode::from(error::EXIT_NUMERICAL)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
