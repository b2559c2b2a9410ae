//! Macroscopic resonant tunneling between the lowest states of opposite wells.
//!
//! With `c = (2I_pΦ0)²` (flux noise in Φ0² converted to energy noise),
//!
//! `I_A(t) = c ∫ df S⁺(f)/(hf)² (cos 2πft - 1)`,
//! `I_B(t) = c ∫ df S⁻(f)/(hf)² sin 2πft`,
//!
//! over `[f_l, f_h]`, and
//!
//! `Γ(ε) = (Δ²/2ħ²) ∫₀^∞ dt e^{I_A(t)} cos(εt/ħ - I_B(t))`,
//!
//! which for low-frequency noise reduces to
//! `√(π/8) Δ²/(ħW) exp(-(ε - ε_p)²/2W²)` with `W² = c∫S⁺df` and
//! `ε_p = c∫S⁻/(hf)df`.

use std::cell::Cell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{H, HBAR, K_B, PHI0};
use crate::error::{check_positive, check_range, invalid, Error, Result};
use crate::models::{Phenomenological, SpectralModel};
use crate::quad::{integrate_log, integrate_panels, kronrod_nodes, Tol};

/// Truncation threshold for `e^{I_A}`.
pub const DECAY_FLOOR: f64 = 1e-12;
/// Relative tolerance of the exponent and cutoff integrals.
pub const EXPONENT_REL_TOL: f64 = 1e-8;
/// Relative tolerance of the time integral, measured against the peak rate.
pub const RATE_REL_TOL: f64 = 1e-6;
/// Spurious feature excluded from `ε_p` for tabulated spectra: (center, half-width), Hz.
pub const TABULATED_NOTCH_HZ: (f64, f64) = (1.4e9, 50e6);

/// Inputs of the tunneling-rate calculation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrtParams {
    pub delta_over_h_hz: f64,
    pub ip_a: f64,
    pub spectrum: SpectralModel,
    /// Low cutoff for `W` and the rate integral, Hz.
    pub f_l_hz: f64,
    pub f_h_hz: f64,
    /// Low cutoff for `ε_p`; defaults to `f_l_hz`.
    #[serde(default)]
    pub f_l_epsilon_p_hz: Option<f64>,
    /// r.m.s. quasistatic energy fluctuation `2I_p·σ_Φ`, J.
    #[serde(default)]
    pub sigma_quasistatic_j: f64,
}

impl MrtParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("delta_over_h_hz", self.delta_over_h_hz)?;
        check_positive("ip_a", self.ip_a)?;
        check_positive("f_l_hz", self.f_l_hz)?;
        check_positive("f_h_hz", self.f_h_hz)?;
        if !(self.f_l_hz < self.f_h_hz) {
            return Err(invalid("f_l_hz", format!("need f_l < f_h, got {} >= {}", self.f_l_hz, self.f_h_hz)));
        }
        if let Some(f) = self.f_l_epsilon_p_hz {
            check_positive("f_l_epsilon_p_hz", f)?;
            if !(f < self.f_h_hz) {
                return Err(invalid("f_l_epsilon_p_hz", "must lie below f_h_hz"));
            }
        }
        check_range("sigma_quasistatic_j", self.sigma_quasistatic_j, 0.0, f64::MAX)?;
        self.spectrum.validate()
    }

    /// `(2I_pΦ0)²`, J² per Φ0².
    fn coupling(&self) -> f64 {
        (2.0 * self.ip_a * PHI0).powi(2)
    }

    /// Tunnel splitting, J.
    pub fn delta_j(&self) -> f64 {
        H * self.delta_over_h_hz
    }

    /// Energy bias of a tilt flux, `2I_pΦ_t`, J.
    pub fn epsilon_of_tilt(&self, tilt_phi0: f64) -> f64 {
        2.0 * self.ip_a * tilt_phi0 * PHI0
    }
}

/// `I_A(t)` and `I_B(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub i_a: f64,
    pub i_b: f64,
}

/// Panel boundaries: log-spaced below `1/(4t)`, quarter periods above.
fn freq_panels(f_l: f64, f_h: f64, t: f64) -> Result<Vec<f64>> {
    let f_c = if t > 0.0 { (0.25 / t).clamp(f_l, f_h) } else { f_h };
    let decades = (f_c / f_l).log10();
    let n_log = (2.0 * decades).ceil().max(1.0) as usize;
    let mut pts: Vec<f64> = (0..=n_log)
        .map(|i| f_l * (f_c / f_l).powf(i as f64 / n_log as f64))
        .collect();
    *pts.last_mut().unwrap() = f_c;
    if f_c < f_h {
        let step = 0.25 / t;
        let n_lin = ((f_h - f_c) / step).ceil();
        if n_lin > 2e6 {
            return Err(invalid("f_h_hz", format!("{n_lin:.0} oscillation panels needed at t = {t:e} s")));
        }
        for k in 1..n_lin as usize {
            pts.push(f_c + k as f64 * step);
        }
        pts.push(f_h);
    }
    Ok(pts)
}

/// Records the first spectrum error raised inside a quadrature closure.
fn spectrum_error(cell: &Cell<Option<Error>>, e: Error) -> f64 {
    let first = cell.take().unwrap_or(e);
    cell.set(Some(first));
    0.0
}

pub fn correlation_exponents(p: &MrtParams, t: f64) -> Result<Exponents> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Exponents { i_a: 0.0, i_b: 0.0 });
    }
    let c = p.coupling();
    let pts = freq_panels(p.f_l_hz, p.f_h_hz, t)?;
    let tol = Tol {
        max_splits: 4 * pts.len() + 4000,
        ..Tol::rel(EXPONENT_REL_TOL).with_abs(1e-12)
    };
    let fail = Cell::new(None);
    let qa = integrate_panels(
        |f| match p.spectrum.s_plus(f) {
            Ok(s) => {
                let sn = (PI * f * t).sin();
                -2.0 * c * s * sn * sn / (H * f).powi(2)
            }
            Err(e) => spectrum_error(&fail, e),
        },
        &pts,
        tol,
    );
    let qb = integrate_panels(
        |f| match p.spectrum.s_minus(f) {
            Ok(s) => c * s * (2.0 * PI * f * t).sin() / (H * f).powi(2),
            Err(e) => spectrum_error(&fail, e),
        },
        &pts,
        tol,
    );
    if let Some(e) = fail.take() {
        return Err(e);
    }
    Ok(Exponents {
        i_a: qa.require("I_A(t) quadrature", EXPONENT_REL_TOL)?,
        i_b: qb.require("I_B(t) quadrature", EXPONENT_REL_TOL)?,
    })
}

/// Linewidth and reorganization energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    /// Broadened linewidth `√(W0² + σ²)`, J.
    pub w_j: f64,
    /// Linewidth from the spectrum alone, J.
    pub w0_j: f64,
    pub epsilon_p_j: f64,
}

pub fn gaussian_params(p: &MrtParams) -> Result<GaussianParams> {
    p.validate()?;
    let c = p.coupling();
    let tol = Tol::rel(EXPONENT_REL_TOL);
    let fail = Cell::new(None);
    let w2 = integrate_log(
        |f| p.spectrum.s_plus(f).unwrap_or_else(|e| spectrum_error(&fail, e)),
        p.f_l_hz,
        p.f_h_hz,
        tol,
    );
    let notch = if p.spectrum.is_tabulated() {
        Some(TABULATED_NOTCH_HZ)
    } else {
        None
    };
    let f_le = p.f_l_epsilon_p_hz.unwrap_or(p.f_l_hz);
    let ep = integrate_log(
        |f| {
            if let Some((c0, hw)) = notch {
                if (f - c0).abs() < hw {
                    return 0.0;
                }
            }
            p.spectrum.s_minus(f).unwrap_or_else(|e| spectrum_error(&fail, e)) / (H * f)
        },
        f_le,
        p.f_h_hz,
        tol,
    );
    if let Some(e) = fail.take() {
        return Err(e);
    }
    let w0 = (c * w2.require("W integral", EXPONENT_REL_TOL)?).sqrt();
    let eps_p = c * ep.require("epsilon_p integral", EXPONENT_REL_TOL)?;
    Ok(GaussianParams {
        w_j: quasistatic_broaden(w0, p.sigma_quasistatic_j)?,
        w0_j: w0,
        epsilon_p_j: eps_p,
    })
}

/// `√(π/8)·Δ²/(ħW)·exp(-(ε - ε_p)²/2W²)` with `Δ = h·Δ/h`.
pub fn rate_gaussian(delta_over_h_hz: f64, w_j: f64, epsilon_p_j: f64, epsilon_j: f64) -> Result<f64> {
    check_positive("w_j", w_j)?;
    let d = H * delta_over_h_hz;
    let x = (epsilon_j - epsilon_p_j) / w_j;
    Ok((PI / 8.0).sqrt() * d * d / (HBAR * w_j) * (-0.5 * x * x).exp())
}

/// `√(W0² + σ²)`.
pub fn quasistatic_broaden(w0_j: f64, sigma_j: f64) -> Result<f64> {
    check_positive("w0_j", w0_j)?;
    check_range("sigma_j", sigma_j, 0.0, f64::MAX)?;
    Ok(w0_j.hypot(sigma_j))
}

/// Gaussian rate convolved with a Gaussian distribution of static offsets of
/// r.m.s. `sigma_j`.
pub fn rate_gaussian_broadened(delta_over_h_hz: f64, w0_j: f64, sigma_j: f64, epsilon_p_j: f64, epsilon_j: f64) -> Result<f64> {
    rate_gaussian(delta_over_h_hz, quasistatic_broaden(w0_j, sigma_j)?, epsilon_p_j, epsilon_j)
}

/// `T = W²/(2k_Bε_p)`, K.
pub fn implied_temperature(w_j: f64, epsilon_p_j: f64) -> Result<f64> {
    check_positive("epsilon_p_j", epsilon_p_j)?;
    Ok(w_j * w_j / (2.0 * K_B * epsilon_p_j))
}

/// Tabulated time integrand of the full rate.
#[derive(Debug, Clone)]
pub struct MrtKernel {
    /// Quadrature nodes, s.
    pub t: Vec<f64>,
    /// Weights times `e^{I_A - σ²t²/2ħ²}`.
    pub weighted_decay: Vec<f64>,
    pub i_b: Vec<f64>,
    /// Truncation time, s.
    pub t_max: f64,
    prefactor: f64,
}

impl MrtKernel {
    pub fn rate(&self, epsilon_j: f64) -> f64 {
        let s: f64 = self
            .t
            .iter()
            .zip(&self.weighted_decay)
            .zip(&self.i_b)
            .map(|((t, w), b)| w * (epsilon_j * t / HBAR - b).cos())
            .sum();
        self.prefactor * s
    }
}

fn total_exponent(p: &MrtParams, t: f64) -> Result<Exponents> {
    let mut e = correlation_exponents(p, t)?;
    let s = p.sigma_quasistatic_j * t / HBAR;
    e.i_a -= 0.5 * s * s;
    Ok(e)
}

fn kernel_on(p: &MrtParams, t_max: f64, panels: usize) -> Result<MrtKernel> {
    let dt = t_max / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|k| kronrod_nodes(k as f64 * dt, (k + 1) as f64 * dt))
        .collect();
    let vals: Vec<Exponents> = nodes
        .par_iter()
        .map(|&(t, _)| total_exponent(p, t))
        .collect::<Result<_>>()?;
    let d = p.delta_j();
    Ok(MrtKernel {
        t: nodes.iter().map(|n| n.0).collect(),
        weighted_decay: nodes.iter().zip(&vals).map(|(n, v)| n.1 * v.i_a.exp()).collect(),
        i_b: vals.iter().map(|v| v.i_b).collect(),
        t_max,
        prefactor: d * d / (2.0 * HBAR * HBAR),
    })
}

/// Builds the kernel: finds where `e^{I_A}` drops below [`DECAY_FLOOR`] and
/// doubles the time panels until rates near the resonance agree to
/// [`RATE_REL_TOL`] of the peak.
pub fn build_kernel(p: &MrtParams) -> Result<MrtKernel> {
    p.validate()?;
    let g = gaussian_params(p)?;
    let floor = DECAY_FLOOR.ln();
    let t0 = HBAR / g.w_j;
    let mut hi = t0;
    let cap = 1e6 * t0;
    loop {
        if total_exponent(p, hi)?.i_a < floor {
            break;
        }
        hi *= 2.0;
        if hi > cap {
            return Err(Error::NonDecaying(format!(
                "e^I_A(t) stays above {DECAY_FLOOR:e} up to t = {cap:e} s; raise the noise or lower f_l"
            )));
        }
    }
    let mut lo = 0.5 * hi;
    while (hi - lo) > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if total_exponent(p, mid)?.i_a < floor {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_max = hi;
    let probes: Vec<f64> = (-8..=8).map(|k| g.epsilon_p_j + 0.5 * k as f64 * g.w_j).collect();
    let mut panels = 16;
    let mut k = kernel_on(p, t_max, panels)?;
    loop {
        let next = kernel_on(p, t_max, 2 * panels)?;
        let peak = probes.iter().map(|&e| next.rate(e).abs()).fold(0.0, f64::max);
        let diff = probes
            .iter()
            .map(|&e| (next.rate(e) - k.rate(e)).abs())
            .fold(0.0, f64::max);
        k = next;
        panels *= 2;
        if diff <= RATE_REL_TOL * peak {
            return Ok(k);
        }
        if panels >= 4096 {
            return Err(Error::NonConvergence {
                what: "MRT time integral",
                achieved: diff / peak,
                requested: RATE_REL_TOL,
            });
        }
    }
}

/// `Γ(ε)` from the full time integral, 1/s.
pub fn rate_full(p: &MrtParams, epsilon_j: f64) -> Result<f64> {
    Ok(build_kernel(p)?.rate(epsilon_j))
}

/// One row of a tilt sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrtRow {
    pub epsilon_j: f64,
    pub epsilon_phi0_tilt: f64,
    pub rate_full_hz: f64,
    pub rate_gauss_hz: f64,
}

/// Full and Gaussian rates over a list of bias energies.
pub fn rate_sweep(p: &MrtParams, epsilons_j: &[f64]) -> Result<Vec<MrtRow>> {
    let k = build_kernel(p)?;
    let g = gaussian_params(p)?;
    epsilons_j
        .par_iter()
        .map(|&e| {
            Ok(MrtRow {
                epsilon_j: e,
                epsilon_phi0_tilt: e / (2.0 * p.ip_a * PHI0),
                rate_full_hz: k.rate(e),
                rate_gauss_hz: rate_gaussian(p.delta_over_h_hz, g.w_j, g.epsilon_p_j, e)?,
            })
        })
        .collect()
}

/// Prediction from a 1/f-like term plus an ohmic term, with the cutoffs of a
/// 24 h acquisition.
///
/// The 1/f-like term passes through (5 μΦ0)²/Hz at 1 Hz; its exponent 0.925
/// is a calibration standing in for the measured interpolation between 1 Hz
/// and 1 GHz, and the ohmic term is a 20 MΩ parallel resistance on 600 pH.
pub fn interpolated_spectrum() -> MrtParams {
    let t_a = 0.030;
    let alpha = 0.925;
    let spectrum = SpectralModel::Phenomenological(Phenomenological {
        a: Phenomenological::a_from_amplitude(5e-6, alpha, t_a),
        alpha,
        t_a_k: t_a,
        b: Phenomenological::b_from_resistance(20e6, 600e-12),
        gamma: 1.0,
        t_b_k: 0.050,
    });
    MrtParams {
        delta_over_h_hz: 0.5e6,
        ip_a: 0.5e-6,
        spectrum,
        f_l_hz: 1.0 / 86_400.0,
        f_h_hz: 10e9,
        f_l_epsilon_p_hz: Some(1e3),
        sigma_quasistatic_j: 0.0,
    }
}

/// `W` and `ε_p` expressed as tilt flux, and the implied temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxWidths {
    pub w_over_2ip_phi0: f64,
    pub epsilon_p_over_2ip_phi0: f64,
    pub implied_t_k: f64,
    pub peak_rate_hz: f64,
}

pub fn flux_widths(p: &MrtParams) -> Result<FluxWidths> {
    let g = gaussian_params(p)?;
    let to_flux = 1.0 / (2.0 * p.ip_a * PHI0);
    Ok(FluxWidths {
        w_over_2ip_phi0: g.w_j * to_flux,
        epsilon_p_over_2ip_phi0: g.epsilon_p_j * to_flux,
        implied_t_k: implied_temperature(g.w_j, g.epsilon_p_j)?,
        peak_rate_hz: rate_gaussian(p.delta_over_h_hz, g.w_j, g.epsilon_p_j, g.epsilon_p_j)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(level: f64, f_l: f64, f_h: f64) -> MrtParams {
        MrtParams {
            delta_over_h_hz: 0.5e6,
            ip_a: 0.5e-6,
            spectrum: SpectralModel::White { level },
            f_l_hz: f_l,
            f_h_hz: f_h,
            f_l_epsilon_p_hz: None,
            sigma_quasistatic_j: 0.0,
        }
    }

    #[test]
    fn exponents_vanish_at_zero_time() {
        let e = correlation_exponents(&white(1e-18, 1.0, 1e6), 0.0).unwrap();
        assert_eq!((e.i_a, e.i_b), (0.0, 0.0));
    }

    #[test]
    fn white_noise_has_no_odd_part() {
        let p = white(1e-18, 1.0, 1e6);
        for t in [1e-9, 1e-6, 3e-4] {
            assert_eq!(correlation_exponents(&p, t).unwrap().i_b, 0.0);
        }
    }

    #[test]
    fn white_small_time_series() {
        let (w0, fl, fh) = (1e-18, 10.0, 1e6);
        let p = white(w0, fl, fh);
        let t = 1e-9;
        let series = -(2.0 * p.ip_a * PHI0 / HBAR).powi(2) * w0 * (fh - fl) * t * t / 2.0;
        let got = correlation_exponents(&p, t).unwrap().i_a;
        // Next term is +(2π)²t⁴∫f²df/12·(...), relative size ~ (2πf_h t)²/10.
        assert!((got / series - 1.0).abs() < 1e-5, "{got} vs {series}");
    }

    #[test]
    fn one_over_f_linewidth_closed_form() {
        let a = 5e-6;
        let p = MrtParams {
            spectrum: SpectralModel::PowerLaw {
                amplitude_at_1hz: a,
                alpha: 1.0,
            },
            ..white(0.0, 1e-3, 1e9)
        };
        let g = gaussian_params(&p).unwrap();
        let expect = a * (1e9f64 / 1e-3).ln().sqrt();
        let got = g.w_j / (2.0 * p.ip_a * PHI0);
        assert!((got / expect - 1.0).abs() < 1e-7);
    }

    #[test]
    fn gaussian_rate_arithmetic() {
        let w = 2.0 * 0.5e-6 * 80e-6 * PHI0;
        let peak = rate_gaussian(0.5e6, w, 0.0, 0.0).unwrap();
        assert!((peak / 3.94e3 - 1.0).abs() < 0.01, "{peak}");
        let a = rate_gaussian(0.5e6, w, 1e-26, 1e-26 + 0.3 * w).unwrap();
        let b = rate_gaussian(0.5e6, w, 1e-26, 1e-26 - 0.3 * w).unwrap();
        assert_eq!(a, b);
        assert!(rate_gaussian(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn implied_temperature_from_central_values() {
        let ip = 0.5e-6;
        let w = 2.0 * ip * 80e-6 * PHI0;
        let ep = 2.0 * ip * 7e-6 * PHI0;
        let t = implied_temperature(w, ep).unwrap();
        assert!((t - 0.0685).abs() < 1e-3, "{t}");
    }

    #[test]
    fn preset_widths() {
        let w = flux_widths(&interpolated_spectrum()).unwrap();
        assert!((w.w_over_2ip_phi0 - 50e-6).abs() < 5e-6, "{w:?}");
        assert!((w.epsilon_p_over_2ip_phi0 - 4e-6).abs() < 1e-6, "{w:?}");
    }

    #[test]
    fn broadening_in_quadrature() {
        assert_eq!(quasistatic_broaden(2.0, 0.0).unwrap(), 2.0);
        assert!((quasistatic_broaden(3.0, 3.0).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!(quasistatic_broaden(0.0, 1.0).is_err());
    }
}
