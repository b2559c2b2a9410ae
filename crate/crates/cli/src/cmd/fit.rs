use std::path::{Path, PathBuf};

use fluxnoise::extract::{
    effective_temperature, fit_model, fit_points_from_operating_points, fit_shared, spectra_from_relaxation,
    synthetic_fit_points, Family, FitOptions, FitPoint, DEFAULT_P_STRAY_UNCERTAINTY, DEFAULT_T1_REL_UNCERTAINTY,
};
use fluxnoise::io::{read_operating_points, write_json, write_rows};
use fluxnoise::models::SpectralModel;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Command, Report};
use crate::config::resolve;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    /// `f10_hz,t1_s,p_stray,matrix_element_wb,l_h`.
    pub points_csv: PathBuf,
}

#[derive(Serialize)]
struct ExtractRow {
    f10_hz: f64,
    s_plus_phi0sq_per_hz: f64,
    s_minus_phi0sq_per_hz: f64,
    t_eff_k: Option<f64>,
}

impl Command for ExtractConfig {
    const NAME: &'static str = "extract";

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.points_csv);
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.points_csv.clone()]
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        let pts = read_operating_points(&self.points_csv)?;
        let rows = pts
            .iter()
            .map(|p| {
                let s = spectra_from_relaxation(p)?;
                Ok(ExtractRow {
                    f10_hz: p.f10_hz,
                    s_plus_phi0sq_per_hz: s.s_plus,
                    s_minus_phi0sq_per_hz: s.s_minus,
                    // p = 0 and p = 0.5 have no finite temperature.
                    t_eff_k: effective_temperature(p.f10_hz, p.p_stray).ok(),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let name = "extracted.csv".to_string();
        write_rows(&out.join(&name), &rows)?;
        Ok(Report {
            summary: vec![format!("extracted {} points", rows.len())],
            outputs: vec![name],
            ..Default::default()
        })
    }
}

fn default_t1_rel() -> f64 {
    DEFAULT_T1_REL_UNCERTAINTY
}

fn default_p_abs() -> f64 {
    DEFAULT_P_STRAY_UNCERTAINTY
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSource {
    OperatingPoints {
        path: PathBuf,
        #[serde(default = "default_t1_rel")]
        t1_rel_uncertainty: f64,
        #[serde(default = "default_p_abs")]
        p_stray_uncertainty: f64,
    },
    /// Points drawn from a declared model with relative noise on `S(±f)`.
    Synthetic {
        model: SpectralModel,
        f_lo_hz: f64,
        f_hi_hz: f64,
        n_points: usize,
        rel_noise: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitGroup {
    #[serde(default)]
    pub label: Option<String>,
    pub points: PointSource,
    pub init: SpectralModel,
}

impl FitGroup {
    fn points(&self) -> CliResult<Vec<FitPoint>> {
        Ok(match &self.points {
            PointSource::OperatingPoints {
                path,
                t1_rel_uncertainty,
                p_stray_uncertainty,
            } => fit_points_from_operating_points(&read_operating_points(path)?, *t1_rel_uncertainty, *p_stray_uncertainty)?,
            PointSource::Synthetic {
                model,
                f_lo_hz,
                f_hi_hz,
                n_points,
                rel_noise,
                seed,
            } => synthetic_fit_points(model, *f_lo_hz, *f_hi_hz, *n_points, *rel_noise, *seed)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: Family,
    pub groups: Vec<FitGroup>,
    /// Parameter names held at their initial values.
    #[serde(default)]
    pub frozen: Vec<String>,
    /// Parameter names common to all groups.
    #[serde(default)]
    pub shared: Vec<String>,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Serialize)]
struct CurveRow {
    f_hz: f64,
    s_plus_data: f64,
    s_minus_data: f64,
    s_plus_fit: f64,
    s_minus_fit: f64,
}

impl FitConfig {
    fn check_names(&self, names: &[String], field: &str) -> CliResult<()> {
        let valid = self.family.param_names();
        for n in names {
            if !valid.contains(&n.as_str()) {
                return Err(CliError::config(format!(
                    "`{field}`: unknown parameter `{n}`; {:?} has {}",
                    self.family,
                    valid.join(", ")
                )));
            }
        }
        Ok(())
    }
}

impl Command for FitConfig {
    const NAME: &'static str = "fit";

    fn resolve_paths(&mut self, base: &Path) {
        for g in &mut self.groups {
            if let PointSource::OperatingPoints { path, .. } = &mut g.points {
                resolve(base, path);
            }
        }
    }

    /// Seeds the multi-start; synthetic datasets keep their own seeds.
    fn set_seed(&mut self, seed: u64) -> CliResult<()> {
        self.options.seed = seed;
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.groups
            .iter()
            .filter_map(|g| match &g.points {
                PointSource::OperatingPoints { path, .. } => Some(path.clone()),
                PointSource::Synthetic { .. } => None,
            })
            .collect()
    }

    fn tolerances(&self) -> Value {
        json!({
            "starts": self.options.starts,
            "max_evals": self.options.max_evals,
            "perturbation": self.options.perturbation,
        })
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        if self.groups.is_empty() {
            return Err(CliError::config("`groups` is empty"));
        }
        self.check_names(&self.frozen, "frozen")?;
        self.check_names(&self.shared, "shared")?;
        let frozen: Vec<bool> = self
            .family
            .param_names()
            .iter()
            .map(|n| self.frozen.iter().any(|f| f == n))
            .collect();
        let groups: Vec<Vec<FitPoint>> = self.groups.iter().map(FitGroup::points).collect::<CliResult<_>>()?;
        let names = self.family.param_names();
        let mut rep = Report::default();

        let (models, converged, json_out) = if groups.len() == 1 && self.shared.is_empty() {
            let r = fit_model(&groups[0], self.family, &self.groups[0].init, &frozen, &self.options)?;
            rep.summary.push(format!("objective {:.4e}", r.objective));
            (vec![r.model.clone()], r.converged, serde_json::to_value(&r))
        } else {
            let inits: Vec<SpectralModel> = self.groups.iter().map(|g| g.init.clone()).collect();
            let shared: Vec<&str> = self.shared.iter().map(String::as_str).collect();
            let r = fit_shared(&groups, self.family, &inits, &frozen, &shared, &self.options)?;
            rep.summary.push(format!("objective {:.4e}", r.objective));
            (r.models.clone(), r.converged, serde_json::to_value(&r))
        };
        let json_out = json_out.map_err(|e| CliError::io(e.to_string()))?;
        write_json(&out.join("fit.json"), &json_out)?;
        rep.outputs.push("fit.json".into());

        for (g, (pts, m)) in groups.iter().zip(&models).enumerate() {
            let p = self.family.params_of(m)?;
            let label = self.groups[g].label.clone().unwrap_or_else(|| format!("group {g}"));
            let parts: Vec<String> = names.iter().zip(&p).map(|(n, v)| format!("{n}={v:.4e}")).collect();
            rep.summary.push(format!("{label}: {}", parts.join(" ")));
            let rows = pts
                .iter()
                .map(|q| {
                    let (sp, sm) = m.plus_minus(q.f_hz)?;
                    Ok(CurveRow {
                        f_hz: q.f_hz,
                        s_plus_data: q.s_plus,
                        s_minus_data: q.s_minus,
                        s_plus_fit: sp,
                        s_minus_fit: sm,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let name = format!("curves_{g:02}.csv");
            write_rows(&out.join(&name), &rows)?;
            rep.outputs.push(name);
        }
        if !converged {
            rep.nonconverged = Some("fit did not converge within max_evals; results were written".into());
        }
        Ok(rep)
    }
}
