//! Quasiparticle tunneling through the two junctions of the SQUID.
//!
//! `S_qp^j(ω) = (32E_Jj/πħ) ∫₀^∞ dx ρ((1+x)Δ) ρ((1+x)Δ+ħω) f[(1+x)Δ] (1 - f[(1+x)Δ+ħω])`
//! for `ω > 0`; negative `ω` swaps the occupation arguments. The
//! `1/√x` singularity of `ρ` at the gap is removed by `x = u²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{EV, HBAR, K_B};
use crate::error::{check_positive, check_range, invalid, Error, Result};
use crate::quad::{integrate_panels, Tol};

/// Default aluminium gap, J (180 μeV).
pub const DEFAULT_GAP_J: f64 = 180e-6 * EV;
/// `D(E_F)·Δ` fixed by `n_qp = 3.5 μm⁻³` at `x_qp = 1.3e-6`, m⁻³.
pub const DEFAULT_DOS_TIMES_GAP_PER_M3: f64 = 3.5e18 / 1.3e-6;
/// Below this `x = (E - Δ)/Δ` the near-gap density of states `1/√(2x)` is used.
pub const DEFAULT_NEAR_GAP_PATCH: f64 = 1e-3;
pub const QP_REL_TOL: f64 = 1e-10;

/// Occupation `f(E)` of quasiparticle states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Occupation {
    /// Fermi function at `t_qp_k`.
    Thermal { t_qp_k: f64 },
    /// Values on an increasing grid of `(E - Δ)/Δ`, log-interpolated between
    /// positive neighbours, held at the first value below the grid and zero
    /// above it.
    Tabulated { x_over_gap: Vec<f64>, occupation: Vec<f64> },
}

impl Occupation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Occupation::Thermal { t_qp_k } => check_positive("t_qp_k", *t_qp_k),
            Occupation::Tabulated { x_over_gap, occupation } => {
                if x_over_gap.len() != occupation.len() || x_over_gap.len() < 2 {
                    return Err(invalid("occupation", "need matching grids with at least two points"));
                }
                if x_over_gap[0] < 0.0 || x_over_gap.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("x_over_gap", "must be non-negative and strictly increasing"));
                }
                for (i, &v) in occupation.iter().enumerate() {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(invalid("occupation", format!("value {v} at row {i} outside [0, 1]")));
                    }
                }
                Ok(())
            }
        }
    }

    /// `f` at `x = (E - Δ)/Δ`.
    pub fn at(&self, x: f64, gap_j: f64) -> f64 {
        match self {
            Occupation::Thermal { t_qp_k } => {
                let y = (1.0 + x) * gap_j / (K_B * t_qp_k);
                1.0 / (y.exp() + 1.0)
            }
            Occupation::Tabulated { x_over_gap, occupation } => {
                let n = x_over_gap.len();
                if x <= x_over_gap[0] {
                    return occupation[0];
                }
                if x > x_over_gap[n - 1] {
                    return 0.0;
                }
                let i = x_over_gap.partition_point(|&v| v < x).max(1);
                let (x0, x1) = (x_over_gap[i - 1], x_over_gap[i]);
                let (y0, y1) = (occupation[i - 1], occupation[i]);
                let s = (x - x0) / (x1 - x0);
                if y0 > 0.0 && y1 > 0.0 {
                    (y0.ln() + s * (y1 / y0).ln()).exp()
                } else {
                    y0 + s * (y1 - y0)
                }
            }
        }
    }

    /// Largest `x` at which `f` can matter.
    fn x_extent(&self, gap_j: f64) -> f64 {
        match self {
            Occupation::Thermal { t_qp_k } => 80.0 * K_B * t_qp_k / gap_j,
            Occupation::Tabulated { x_over_gap, .. } => *x_over_gap.last().unwrap(),
        }
    }
}

/// Junction and quasiparticle parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpParams {
    pub gap_j: f64,
    pub e_j1_j: f64,
    pub e_j2_j: f64,
    pub occupation: Occupation,
    /// States per (J·m³) at the Fermi energy.
    pub dos_ef_per_j_m3: f64,
    #[serde(default = "default_patch")]
    pub near_gap_patch: f64,
}

fn default_patch() -> f64 {
    DEFAULT_NEAR_GAP_PATCH
}

impl QpParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("gap_j", self.gap_j)?;
        check_range("e_j1_j", self.e_j1_j, 0.0, f64::MAX)?;
        check_range("e_j2_j", self.e_j2_j, 0.0, f64::MAX)?;
        check_positive("dos_ef_per_j_m3", self.dos_ef_per_j_m3)?;
        check_range("near_gap_patch", self.near_gap_patch, 0.0, 0.1)?;
        self.occupation.validate()
    }

    fn e_j(&self, junction: usize) -> Result<f64> {
        match junction {
            1 => Ok(self.e_j1_j),
            2 => Ok(self.e_j2_j),
            _ => Err(invalid("junction", format!("must be 1 or 2, got {junction}"))),
        }
    }
}

/// Josephson energies of the two junctions: `β_max E_L = E_J1 + E_J2` split
/// by asymmetry `d = (E_J1 - E_J2)/(E_J1 + E_J2)`.
pub fn junction_energies(beta_max: f64, l_h: f64, d: f64) -> Result<(f64, f64)> {
    check_positive("beta_max", beta_max)?;
    check_positive("l_h", l_h)?;
    if !(d.abs() < 1.0) {
        return Err(invalid("d", "|d| must be < 1"));
    }
    let e_l = (crate::constants::PHI0 / (2.0 * PI)).powi(2) / l_h;
    let half = 0.5 * beta_max * e_l;
    Ok((half * (1.0 + d), half * (1.0 - d)))
}

/// `2u·ρ((1+x)Δ)` with `x = u²`, finite at the gap.
fn rho_jacobian(u: f64, patch: f64) -> f64 {
    let x = u * u;
    if x < patch {
        // 2u / √(2u²)
        2f64.sqrt()
    } else {
        2.0 * (1.0 + x) / (2.0 + x).sqrt()
    }
}

fn rho_at(x: f64) -> f64 {
    (1.0 + x) / (x * (2.0 + x)).sqrt()
}

/// Panel boundaries in `u` covering `[0, √x_max]`.
fn u_panels(p: &QpParams) -> Vec<f64> {
    let x_max = p.occupation.x_extent(p.gap_j);
    let mut pts: Vec<f64> = vec![0.0];
    if let Occupation::Tabulated { x_over_gap, .. } = &p.occupation {
        pts.extend(x_over_gap.iter().filter(|&&x| x > 0.0).map(|x| x.sqrt()));
    } else {
        let um = x_max.sqrt();
        pts.extend((1..=16).map(|k| um * k as f64 / 16.0));
    }
    let patch = p.near_gap_patch.sqrt();
    if patch > 0.0 && patch < *pts.last().unwrap() {
        pts.push(patch);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `S_qp^j(ω)` for signed `ω`, 1/s.
pub fn qp_spectral_density(p: &QpParams, junction: usize, omega: f64) -> Result<f64> {
    p.validate()?;
    let ej = p.e_j(junction)?;
    let hw = HBAR * omega.abs();
    if !(hw < p.gap_j) {
        return Err(Error::OutOfRange(format!(
            "ħ|ω| = {:.3e} J is not below the gap {:.3e} J",
            hw, p.gap_j
        )));
    }
    let y = hw / p.gap_j;
    let pos = omega >= 0.0;
    let gap = p.gap_j;
    let occ = &p.occupation;
    let patch = p.near_gap_patch;
    let integrand = |u: f64| {
        let x = u * u;
        let (lo, hi) = (occ.at(x, gap), occ.at(x + y, gap));
        let pair = if pos { lo * (1.0 - hi) } else { hi * (1.0 - lo) };
        if pair == 0.0 {
            return 0.0;
        }
        rho_jacobian(u, patch) * rho_at(x + y) * pair
    };
    let pts = u_panels(p);
    let q = integrate_panels(integrand, &pts, Tol::rel(QP_REL_TOL).with_abs(1e-300));
    let v = q.require("quasiparticle spectral density", QP_REL_TOL)?;
    Ok(32.0 * ej / (PI * HBAR) * v)
}

/// Rates from both junctions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpRates {
    pub f10_hz: f64,
    pub gamma_down_hz: f64,
    pub gamma_up_hz: f64,
    /// `None` when both rates vanish (no quasiparticle limit).
    pub t1_s: Option<f64>,
    pub p_stray: Option<f64>,
}

/// `Γ = Σ_j |⟨f|sin(φ̂_j/2)|i⟩|² S_qp^j(ω_if)`; `Γ↓` at `+ω10`, `Γ↑` at `-ω10`.
pub fn qp_rates(p: &QpParams, sin_half: [f64; 2], f10_hz: f64) -> Result<QpRates> {
    check_positive("f10_hz", f10_hz)?;
    let w = 2.0 * PI * f10_hz;
    let mut down = 0.0;
    let mut up = 0.0;
    for (j, m) in sin_half.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        down += m * m * qp_spectral_density(p, j + 1, w)?;
        up += m * m * qp_spectral_density(p, j + 1, -w)?;
    }
    let total = down + up;
    let (t1, ps) = if total > 0.0 {
        (Some(1.0 / total), Some(up / total))
    } else {
        (None, None)
    };
    Ok(QpRates {
        f10_hz,
        gamma_down_hz: down,
        gamma_up_hz: up,
        t1_s: t1,
        p_stray: ps,
    })
}

/// Quasiparticle density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpDensity {
    pub n_qp_per_m3: f64,
    pub x_qp: f64,
}

/// `n_qp = 2D(E_F)∫ρf dE`, `x_qp = n_qp/(D(E_F)Δ)`.
pub fn qp_density(p: &QpParams) -> Result<QpDensity> {
    p.validate()?;
    let gap = p.gap_j;
    let patch = p.near_gap_patch;
    let occ = &p.occupation;
    let q = integrate_panels(
        |u| {
            let f = occ.at(u * u, gap);
            if f == 0.0 {
                0.0
            } else {
                rho_jacobian(u, patch) * f
            }
        },
        &u_panels(p),
        Tol::rel(QP_REL_TOL).with_abs(1e-300),
    );
    let integral = q.require("quasiparticle density", QP_REL_TOL)?;
    let x_qp = 2.0 * integral;
    Ok(QpDensity {
        n_qp_per_m3: x_qp * p.dos_ef_per_j_m3 * gap,
        x_qp,
    })
}

/// Low-temperature limit `√(2πk_BT/Δ)·e^{-Δ/k_BT}`.
pub fn thermal_x_qp_asymptotic(gap_j: f64, t_k: f64) -> f64 {
    let a = gap_j / (K_B * t_k);
    (2.0 * PI / a).sqrt() * (-a).exp()
}

/// Temperature of a thermal distribution with the given `x_qp`, by bisection.
pub fn thermal_t_qp_for_x_qp(template: &QpParams, x_qp: f64) -> Result<f64> {
    if !(x_qp > 0.0 && x_qp < 1e-2) {
        return Err(invalid("x_qp", format!("must lie in (0, 1e-2), got {x_qp}")));
    }
    let at = |t: f64| -> Result<f64> {
        let q = QpParams {
            occupation: Occupation::Thermal { t_qp_k: t },
            ..template.clone()
        };
        Ok(qp_density(&q)?.x_qp)
    };
    let tc = template.gap_j / (1.764 * K_B);
    let (mut lo, mut hi) = (1e-3 * tc, 0.5 * tc);
    if at(hi)? < x_qp {
        return Err(invalid("x_qp", "too large for a thermal distribution below Tc/2"));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if at(mid)? < x_qp {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Gap, symmetric junctions of a `β_max = 2.5`, 600 pH loop and a thermal
/// distribution tuned to `x_qp = 1.3e-6`.
pub fn fitted_density_preset() -> Result<QpParams> {
    let (e1, e2) = junction_energies(2.5, 600e-12, 0.0)?;
    let mut p = QpParams {
        gap_j: DEFAULT_GAP_J,
        e_j1_j: e1,
        e_j2_j: e2,
        occupation: Occupation::Thermal { t_qp_k: 0.15 },
        dos_ef_per_j_m3: DEFAULT_DOS_TIMES_GAP_PER_M3 / DEFAULT_GAP_J,
        near_gap_patch: DEFAULT_NEAR_GAP_PATCH,
    };
    let t = thermal_t_qp_for_x_qp(&p, 1.3e-6)?;
    p.occupation = Occupation::Thermal { t_qp_k: t };
    Ok(p)
}
