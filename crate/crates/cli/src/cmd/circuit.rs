use std::path::{Path, PathBuf};

use fluxnoise::circuit::{asymmetry_crosstalk, sweep_barrier, CircuitParams, Crosstalk, Grid, SweepRow};
use fluxnoise::io::{read_json, read_occupation_csv, write_json, write_rows};
use fluxnoise::qp::{fitted_density_preset, qp_density, qp_rates, QpParams, QP_REL_TOL};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Command, Report};
use crate::config::{resolve, Axis};
use crate::error::{CliError, CliResult};
use crate::manifest::sha256_hex;

/// Environment variable naming the cache directory for circuit sweeps.
pub const CACHE_ENV: &str = "FLUXNOISE_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub l_h: f64,
    pub c_f: f64,
    pub beta_max: f64,
    #[serde(default)]
    pub phi_t_phi0: f64,
    #[serde(default)]
    pub grid: Grid,
}

impl CircuitSpec {
    fn params(&self) -> CircuitParams {
        CircuitParams {
            l_h: self.l_h,
            c_f: self.c_f,
            beta_max: self.beta_max,
            phi_ba: 0.0,
            phi_t: self.phi_t_phi0,
            grid: self.grid,
        }
    }
}

/// Barrier sweep, served from the cache directory when one is configured.
fn cached_sweep(spec: &CircuitSpec, phi_ba: &[f64]) -> CliResult<Vec<SweepRow>> {
    let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
        return Ok(sweep_barrier(&spec.params(), phi_ba)?);
    };
    let key = json!({"version": env!("CARGO_PKG_VERSION"), "circuit": spec, "phi_ba_phi0": phi_ba});
    let path = dir.join(format!("circuit-{}.json", sha256_hex(key.to_string().as_bytes())));
    if path.is_file() {
        match read_json::<Vec<SweepRow>>(&path) {
            Ok(rows) if rows.len() == phi_ba.len() => return Ok(rows),
            _ => eprintln!("warning: ignoring unreadable cache entry {}", path.display()),
        }
    }
    let rows = sweep_barrier(&spec.params(), phi_ba)?;
    let stored = std::fs::create_dir_all(&dir)
        .map_err(fluxnoise::Error::from)
        .and_then(|_| write_json(&path, &rows));
    if let Err(e) = stored {
        eprintln!("warning: could not write cache entry {}: {e}", path.display());
    }
    Ok(rows)
}

fn circuit_tolerances(spec: &CircuitSpec) -> Value {
    json!({
        "grid_points": spec.grid.n_points,
        "grid_half_width_phi0": spec.grid.half_width_phi0,
        "richardson_levels": 2,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub circuit: CircuitSpec,
    pub phi_ba_phi0: Axis,
    /// Junction asymmetry; adds `crosstalk.csv` when set.
    #[serde(default)]
    pub asymmetry_d: Option<f64>,
}

#[derive(Serialize)]
struct CrosstalkRow {
    phi_ba_phi0: f64,
    tilt_offset_phi0: f64,
    transfer: f64,
}

impl Command for CircuitConfig {
    const NAME: &'static str = "circuit";

    fn tolerances(&self) -> Value {
        circuit_tolerances(&self.circuit)
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        let phis = self.phi_ba_phi0.values("phi_ba_phi0")?;
        let rows = cached_sweep(&self.circuit, &phis)?;
        let mut rep = Report::default();
        write_rows(&out.join("sweep.csv"), &rows)?;
        rep.outputs.push("sweep.csv".into());
        if let Some(d) = self.asymmetry_d {
            let ct = phis
                .iter()
                .map(|&b| {
                    let Crosstalk {
                        tilt_offset_phi0,
                        transfer,
                    } = asymmetry_crosstalk(d, b)?;
                    Ok(CrosstalkRow {
                        phi_ba_phi0: b,
                        tilt_offset_phi0,
                        transfer,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            write_rows(&out.join("crosstalk.csv"), &ct)?;
            rep.outputs.push("crosstalk.csv".into());
        }
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, 0f64), |(a, b), r| (a.min(r.f10_hz), b.max(r.f10_hz)));
        rep.summary.push(format!(
            "{} bias points, f10 from {lo:.4e} to {hi:.4e} Hz",
            rows.len()
        ));
        Ok(rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpPreset {
    /// Thermal occupation giving `x_qp = 1.3e-6` on a `β_max = 2.5`, 600 pH loop.
    FittedDensity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpConfig {
    #[serde(default)]
    pub preset: Option<QpPreset>,
    #[serde(default)]
    pub params: Option<QpParams>,
    /// `x_over_gap,occupation`; replaces the occupation in `params`.
    #[serde(default)]
    pub occupation_csv: Option<PathBuf>,
    #[serde(default)]
    pub circuit: Option<CircuitSpec>,
    #[serde(default)]
    pub phi_ba_phi0: Option<Axis>,
}

impl Command for QpConfig {
    const NAME: &'static str = "qp";

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &mut self.occupation_csv {
            resolve(base, p);
        }
    }

    fn finalize(&mut self) -> CliResult<()> {
        if self.params.is_none() {
            match self.preset {
                Some(QpPreset::FittedDensity) => self.params = Some(fitted_density_preset()?),
                None => return Err(CliError::config("qp needs `params` or `preset`")),
            }
        }
        if self.preset.is_some() {
            self.circuit.get_or_insert(CircuitSpec {
                l_h: 600e-12,
                c_f: 100e-15,
                beta_max: 2.5,
                phi_t_phi0: 0.0,
                grid: Grid::default(),
            });
            // β from 1.3 down to 0.9: f10 from about 10 MHz to 8 GHz.
            self.phi_ba_phi0.get_or_insert(Axis::Linear {
                start: (1.3f64 / 2.5).acos() / std::f64::consts::PI,
                stop: (0.9f64 / 2.5).acos() / std::f64::consts::PI,
                points: 41,
            });
        }
        if self.circuit.is_none() || self.phi_ba_phi0.is_none() {
            return Err(CliError::config("qp needs `circuit` and `phi_ba_phi0` unless a preset supplies them"));
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.occupation_csv.iter().cloned().collect()
    }

    fn tolerances(&self) -> Value {
        let mut t = self.circuit.as_ref().map(circuit_tolerances).unwrap_or_else(|| json!({}));
        t["qp_rel_tol"] = json!(QP_REL_TOL);
        t
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        let mut p = self.params.clone().expect("finalized");
        if let Some(path) = &self.occupation_csv {
            p.occupation = read_occupation_csv(path)?;
        }
        p.validate()?;
        let circuit = self.circuit.expect("finalized");
        let phis = self.phi_ba_phi0.as_ref().expect("finalized").values("phi_ba_phi0")?;
        let rows = cached_sweep(&circuit, &phis)?;
        let rates = rows
            .iter()
            .map(|r| Ok(qp_rates(&p, [r.sin_half_1, r.sin_half_2], r.f10_hz)?))
            .collect::<CliResult<Vec<_>>>()?;
        let density = qp_density(&p)?;
        let mut rep = Report::default();
        write_rows(&out.join("qp_rates.csv"), &rates)?;
        write_json(&out.join("density.json"), &density)?;
        rep.outputs.push("qp_rates.csv".into());
        rep.outputs.push("density.json".into());
        rep.summary.push(format!("x_qp = {:.3e}, {} operating points", density.x_qp, rates.len()));
        Ok(rep)
    }
}
