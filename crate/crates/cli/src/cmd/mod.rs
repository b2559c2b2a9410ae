//! Subcommands and the shared run driver.

mod circuit;
mod fit;
mod mrt;
mod noise;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::from_value;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest, Manifest, FORMAT, MANIFEST_NAME};

pub use circuit::{CircuitConfig, QpConfig};
pub use fit::{ExtractConfig, FitConfig};
pub use mrt::MrtConfig;
pub use noise::{EstimateConfig, ShotsConfig, SynthConfig};

/// What a subcommand produced.
#[derive(Default)]
pub struct Report {
    /// File names inside the output directory, in write order.
    pub outputs: Vec<String>,
    /// Lines for stdout.
    pub summary: Vec<String>,
    /// Set when results were written but an optimizer did not converge.
    pub nonconverged: Option<String>,
}

pub trait Command: Serialize + DeserializeOwned {
    const NAME: &'static str;

    /// Makes relative paths absolute against the config file's directory.
    fn resolve_paths(&mut self, _base: &Path) {}

    fn set_seed(&mut self, _seed: u64) -> CliResult<()> {
        Err(CliError::config(format!("`--seed` does not apply to `{}`", Self::NAME)))
    }

    /// Fills presets and defaults so the stored config is self-contained.
    fn finalize(&mut self) -> CliResult<()> {
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }

    fn tolerances(&self) -> Value {
        json!({})
    }

    fn run(&self, out: &Path) -> CliResult<Report>;
}

/// Output of a completed run.
pub struct RunOutcome {
    pub manifest: Manifest,
    pub summary: Vec<String>,
    pub nonconverged: Option<String>,
}

/// Deserializes, finalizes and runs a config, then writes the manifest.
pub fn execute<C: Command>(
    value: Value,
    base: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    threads: Option<usize>,
) -> CliResult<RunOutcome> {
    let mut cfg: C = from_value(value, &format!("{} config", C::NAME))?;
    if let Some(b) = base {
        cfg.resolve_paths(b);
    }
    if let Some(s) = seed {
        cfg.set_seed(s)?;
    }
    cfg.finalize()?;

    let mut inputs = Vec::new();
    for p in cfg.inputs() {
        if !p.is_file() {
            return Err(CliError::io(format!("input file {} does not exist", p.display())));
        }
        inputs.push(digest(&p, p.display().to_string())?);
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    let report = cfg.run(out)?;
    let outputs = report
        .outputs
        .iter()
        .map(|name| digest(&out.join(name), name.clone()))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = Manifest {
        format: FORMAT,
        tool: "fluxnoise".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: C::NAME.into(),
        config: serde_json::to_value(&cfg).map_err(|e| CliError::config(e.to_string()))?,
        threads,
        inputs,
        outputs,
        tolerances: cfg.tolerances(),
    };
    fluxnoise::io::write_json(&out.join(MANIFEST_NAME), &manifest)?;
    Ok(RunOutcome {
        manifest,
        summary: report.summary,
        nonconverged: report.nonconverged,
    })
}

/// Runs the named command on a config value.
pub fn dispatch(
    name: &str,
    value: Value,
    base: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    threads: Option<usize>,
) -> CliResult<RunOutcome> {
    match name {
        SynthConfig::NAME => execute::<SynthConfig>(value, base, seed, out, threads),
        ShotsConfig::NAME => execute::<ShotsConfig>(value, base, seed, out, threads),
        EstimateConfig::NAME => execute::<EstimateConfig>(value, base, seed, out, threads),
        ExtractConfig::NAME => execute::<ExtractConfig>(value, base, seed, out, threads),
        FitConfig::NAME => execute::<FitConfig>(value, base, seed, out, threads),
        CircuitConfig::NAME => execute::<CircuitConfig>(value, base, seed, out, threads),
        MrtConfig::NAME => execute::<MrtConfig>(value, base, seed, out, threads),
        QpConfig::NAME => execute::<QpConfig>(value, base, seed, out, threads),
        other => Err(CliError::config(format!("unknown command `{other}` in manifest"))),
    }
}

/// Re-runs a manifest. Inputs must still match their recorded digests.
pub fn replay(manifest_path: &Path, out: Option<&Path>, threads: Option<usize>, verify: bool) -> CliResult<RunOutcome> {
    let m: Manifest = fluxnoise::io::read_json(manifest_path)?;
    if m.format != FORMAT {
        return Err(CliError::config(format!("manifest format {} is not supported (expected {FORMAT})", m.format)));
    }
    for d in &m.inputs {
        let now = digest(Path::new(&d.path), d.path.clone())?;
        if now.sha256 != d.sha256 {
            return Err(CliError::config(format!("input {} changed since the manifest was written", d.path)));
        }
    }
    let default_out = manifest_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let out = out.map(Path::to_path_buf).unwrap_or(default_out);
    let outcome = dispatch(&m.command, m.config.clone(), None, None, &out, threads.or(m.threads))?;
    if verify {
        let mut bad = Vec::new();
        for (a, b) in m.outputs.iter().zip(&outcome.manifest.outputs) {
            if a != b {
                bad.push(a.path.clone());
            }
        }
        if m.outputs.len() != outcome.manifest.outputs.len() {
            bad.push("(output list)".into());
        }
        if !bad.is_empty() {
            return Err(CliError::numerical(format!("replayed outputs differ: {}", bad.join(", "))));
        }
    }
    Ok(outcome)
}
