use std::path::Path;

use fluxnoise::constants::PHI0;
use fluxnoise::io::{write_json, write_rows};
use fluxnoise::mrt::{
    flux_widths, gaussian_params, interpolated_spectrum, rate_sweep, MrtParams, DECAY_FLOOR, EXPONENT_REL_TOL,
    RATE_REL_TOL,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Command, Report};
use crate::config::Axis;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MrtPreset {
    /// 1/f-like noise anchored at 5 μΦ0/√Hz plus a 20 MΩ ohmic term.
    InterpolatedSpectrum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrtConfig {
    #[serde(default)]
    pub preset: Option<MrtPreset>,
    #[serde(default)]
    pub params: Option<MrtParams>,
    /// Tilt flux `ε/(2I_pΦ0)`; defaults to `ε_p ± 4W` in 161 points.
    #[serde(default)]
    pub epsilon_phi0: Option<Axis>,
}

impl Command for MrtConfig {
    const NAME: &'static str = "mrt";

    fn finalize(&mut self) -> CliResult<()> {
        if self.params.is_none() {
            match self.preset {
                Some(MrtPreset::InterpolatedSpectrum) => self.params = Some(interpolated_spectrum()),
                None => return Err(CliError::config("mrt needs `params` or `preset`")),
            }
        }
        Ok(())
    }

    fn tolerances(&self) -> Value {
        json!({
            "decay_floor": DECAY_FLOOR,
            "exponent_rel_tol": EXPONENT_REL_TOL,
            "rate_rel_tol": RATE_REL_TOL,
        })
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        let p = self.params.as_ref().expect("finalized");
        p.validate()?;
        let to_j = 2.0 * p.ip_a * PHI0;
        let eps: Vec<f64> = match &self.epsilon_phi0 {
            Some(a) => a.values("epsilon_phi0")?.iter().map(|x| x * to_j).collect(),
            None => {
                let g = gaussian_params(p)?;
                (0..161)
                    .map(|i| g.epsilon_p_j + g.w_j * (-4.0 + 8.0 * i as f64 / 160.0))
                    .collect()
            }
        };
        let rows = rate_sweep(p, &eps)?;
        let w = flux_widths(p)?;
        write_rows(&out.join("rates.csv"), &rows)?;
        write_json(&out.join("widths.json"), &w)?;
        Ok(Report {
            outputs: vec!["rates.csv".into(), "widths.json".into()],
            summary: vec![
                format!("W/(2 I_p) = {:.2} uPhi0", w.w_over_2ip_phi0 * 1e6),
                format!("eps_p/(2 I_p) = {:.2} uPhi0", w.epsilon_p_over_2ip_phi0 * 1e6),
                format!("implied T = {:.1} mK, Gaussian peak rate = {:.4e} 1/s", w.implied_t_k * 1e3, w.peak_rate_hz),
            ],
            ..Default::default()
        })
    }
}
