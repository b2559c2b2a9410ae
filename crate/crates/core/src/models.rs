//! Two-sided flux-noise spectra.
//!
//! `S(ω)` is in Φ0²/Hz and is evaluated internally at angular frequency.
//! Public evaluators take frequencies in Hz. `S⁺(f) = S(f) + S(-f)` and
//! `S⁻(f) = S(f) - S(-f)`.
//!
//! Every thermal term has the form `h(ω)·[1 + coth(ħω/2k_BT)]` with `h` odd,
//! so `S⁺ = 2h·coth` and `S⁻ = 2h`. Evaluating the two-sided value through
//! `one_plus_coth` keeps detailed balance exact at both signs of `ω`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{coth, one_plus_coth, HBAR, K_B, PHI0};
use crate::error::{check_positive, check_range, invalid, Error, Result};
use crate::quad::{integrate, integrate_panels, integrate_to_inf, Tol};

/// `S = A ω|ω|^{-α}[1+coth(ħω/2k_BT_A)] + B ω|ω|^{γ-1}[1+coth(ħω/2k_BT_B)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenomenological {
    /// Φ0²/Hz·(rad/s)^(α-1).
    pub a: f64,
    pub alpha: f64,
    pub t_a_k: f64,
    /// Φ0²/Hz·(rad/s)^(-γ).
    pub b: f64,
    pub gamma: f64,
    pub t_b_k: f64,
}

impl Phenomenological {
    pub fn validate(&self) -> Result<()> {
        check_range("a", self.a, 0.0, f64::MAX)?;
        check_range("b", self.b, 0.0, f64::MAX)?;
        check_positive("t_a_k", self.t_a_k)?;
        check_positive("t_b_k", self.t_b_k)?;
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(invalid("alpha", format!("must lie in (0, 2), got {}", self.alpha)));
        }
        check_range("gamma", self.gamma, 1.0, f64::MAX)?;
        Ok(())
    }

    /// `A` such that the 1/f term alone gives `S⁺(f_ref) = amplitude²·(1 Hz/f_ref)^α`
    /// at `f_ref = 1 Hz`.
    pub fn a_from_amplitude(amplitude_at_1hz: f64, alpha: f64, t_a_k: f64) -> f64 {
        let w = 2.0 * PI;
        let x = HBAR * w / (2.0 * K_B * t_a_k);
        amplitude_at_1hz * amplitude_at_1hz / (2.0 * w.powf(1.0 - alpha) * coth(x))
    }

    /// Ohmic amplitude `B = ħL²/(RΦ0²)` of a parallel resistance `R` (γ = 1).
    pub fn b_from_resistance(r_ohm: f64, l_h: f64) -> f64 {
        HBAR * l_h * l_h / (r_ohm * PHI0 * PHI0)
    }

    /// Inverse of [`Self::b_from_resistance`].
    pub fn resistance_from_b(b: f64, l_h: f64) -> f64 {
        HBAR * l_h * l_h / (b * PHI0 * PHI0)
    }
}

/// Drude ensemble with `ρ(τ) ∝ 1/τ` on `[τ_min, τ_max]` in closed form:
/// `S ∝ (ħ/T)[1+coth]·[atan(ωτ_max) - atan(ωτ_min)]`, scaled so that
/// `S⁺(2π·1 Hz) = amplitude²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteCutoff {
    /// Φ0/√Hz at 1 Hz.
    pub amplitude: f64,
    pub t_k: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
}

impl FiniteCutoff {
    pub fn validate(&self) -> Result<()> {
        check_range("amplitude", self.amplitude, 0.0, f64::MAX)?;
        check_positive("t_k", self.t_k)?;
        check_positive("tau_min_s", self.tau_min_s)?;
        if !(self.tau_max_s > self.tau_min_s) || !self.tau_max_s.is_finite() {
            return Err(invalid("tau_max_s", "must be finite and exceed tau_min_s"));
        }
        Ok(())
    }

    /// `ω_max = 1/τ_min`.
    pub fn omega_max(&self) -> f64 {
        1.0 / self.tau_min_s
    }

    fn h_raw(&self, w: f64) -> f64 {
        HBAR / self.t_k * ((w * self.tau_max_s).atan() - (w * self.tau_min_s).atan())
    }
}

/// Relaxation-time weight for a Drude ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DrudeWeight {
    /// `ρ ∝ 1/τ` on `[tau_min_s, tau_max_s]`.
    InverseTau { tau_min_s: f64, tau_max_s: f64 },
    /// `ρ ∝ τ^(-exponent)` on `[tau_min_s, tau_max_s]`.
    PowerTau {
        exponent: f64,
        tau_min_s: f64,
        tau_max_s: f64,
    },
    /// A single fluctuator at `tau_s`.
    Delta { tau_s: f64 },
}

impl DrudeWeight {
    fn validate(&self) -> Result<()> {
        match *self {
            DrudeWeight::InverseTau { tau_min_s, tau_max_s }
            | DrudeWeight::PowerTau {
                tau_min_s, tau_max_s, ..
            } => {
                check_positive("tau_min_s", tau_min_s)?;
                if !(tau_max_s > tau_min_s) || !tau_max_s.is_finite() {
                    return Err(invalid("tau_max_s", "weight must be supported on a finite interval above tau_min_s"));
                }
                if let DrudeWeight::PowerTau { exponent, .. } = self {
                    if !exponent.is_finite() {
                        return Err(invalid("exponent", "must be finite"));
                    }
                }
                Ok(())
            }
            DrudeWeight::Delta { tau_s } => check_positive("tau_s", tau_s),
        }
    }
}

/// `(ħ/T)[1+coth(ħω/2k_BT)]·∫ρ(τ) ωτ/(1+ω²τ²) dτ` by quadrature in `ln τ`.
///
/// The result carries no overall normalization; for `ρ = 1/τ` it equals the
/// unnormalized arctan form.
pub fn drude_ensemble_quadrature(weight: &DrudeWeight, t_k: f64, omega: f64) -> Result<f64> {
    check_positive("t_k", t_k)?;
    if omega == 0.0 || !omega.is_finite() {
        return Err(invalid("omega", "must be finite and nonzero"));
    }
    weight.validate()?;
    let x = HBAR * omega / (2.0 * K_B * t_k);
    Ok(HBAR / t_k * one_plus_coth(x) * drude_odd_part(weight, omega)?)
}

/// `∫ρ(τ) ωτ/(1+ω²τ²) dτ`, odd in `ω`.
fn drude_odd_part(weight: &DrudeWeight, omega: f64) -> Result<f64> {
    let (lo, hi, p) = match *weight {
        DrudeWeight::Delta { tau_s } => {
            return Ok(omega * tau_s / (1.0 + omega * omega * tau_s * tau_s));
        }
        DrudeWeight::InverseTau { tau_min_s, tau_max_s } => (tau_min_s, tau_max_s, 1.0),
        DrudeWeight::PowerTau {
            exponent,
            tau_min_s,
            tau_max_s,
        } => (tau_min_s, tau_max_s, exponent),
    };
    let (ua, ub) = (lo.ln(), hi.ln());
    let upeak = -omega.abs().ln();
    let mut pts = vec![ua];
    let n = (ub - ua).ceil() as usize;
    for i in 1..n {
        pts.push(ua + (ub - ua) * i as f64 / n as f64);
    }
    pts.push(ub);
    if upeak > ua && upeak < ub {
        pts.push(upeak);
        pts.sort_by(f64::total_cmp);
    }
    // ρ(τ)·τ·ωτ/(1+ω²τ²) with τ = e^u.
    let q = integrate_panels(
        |u| {
            let tau = u.exp();
            let wt = omega * tau;
            tau.powf(1.0 - p) * wt / (1.0 + wt * wt)
        },
        &pts,
        Tol::rel(1e-12),
    );
    q.require("Drude ensemble quadrature", 1e-12)
}

/// A Drude ensemble with general weight, scaled so `S⁺(2π·1 Hz) = amplitude²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrudeEnsemble {
    pub amplitude: f64,
    pub t_k: f64,
    pub weight: DrudeWeight,
}

/// One diffusion mode: coupling weight `b²` and relaxation rate `Γ` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMode {
    pub b2: f64,
    pub gamma_rad_s: f64,
}

/// Spin-diffusion noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SpinDiffusion {
    /// `ħω χ0 [1+coth] Σ b² Γ/(ω²+Γ²)`; `chi0` sets the overall scale.
    Modes {
        modes: Vec<DiffusionMode>,
        chi0: f64,
        t_k: f64,
    },
    /// `A[1+coth](ħω/k_BT)∫₀^∞ x^{3-2α} e^{-x/√ω_max}/(ω²+x⁴) dx`, with `A`
    /// fixed by `S⁺(2π·1 Hz) = amplitude²`.
    Analytic {
        amplitude: f64,
        alpha: f64,
        omega_max_rad_s: f64,
        t_k: f64,
    },
}

/// `ω_max = D/ℓ²` for a diffusion constant in nm²/s and a length in nm.
pub fn diffusion_omega_max(d_nm2_per_s: f64, l_nm: f64) -> f64 {
    d_nm2_per_s / (l_nm * l_nm)
}

/// `∫₀^∞ x^{3-2α} e^{-x/√ω_max}/(ω²+x⁴) dx` for `ω > 0`.
pub fn spin_diffusion_integral(alpha: f64, omega_max: f64, omega: f64) -> Result<f64> {
    if !(alpha < 2.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("integrand diverges at 0 for alpha = {alpha} >= 2")));
    }
    check_positive("omega_max_rad_s", omega_max)?;
    let w = omega.abs();
    check_positive("omega", w)?;
    let sw = w.sqrt();
    let smax = omega_max.sqrt();
    let p = 4.0 - 2.0 * alpha;
    let tol = Tol::rel(1e-11);
    // On [0, √ω] put x = √ω·u^{1/p}; then x^{3-2α}dx = (√ω)^p/p du.
    let head = integrate(
        |u: f64| {
            let x = sw * u.powf(1.0 / p);
            let x2 = x * x;
            (-x / smax).exp() / (w * w + x2 * x2)
        },
        0.0,
        1.0,
        tol,
    )
    .require("spin-diffusion integral", 1e-11)?
        * sw.powf(p)
        / p;
    let scale = sw.min(smax).max(f64::MIN_POSITIVE);
    let tail = integrate_to_inf(
        |x: f64| {
            let x2 = x * x;
            x.powf(3.0 - 2.0 * alpha) * (-x / smax).exp() / (w * w + x2 * x2)
        },
        sw,
        scale,
        tol,
    )
    .require("spin-diffusion integral", 1e-11)?;
    Ok(head + tail)
}

/// Measured or extracted spectrum on a signed-frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    /// Signed frequencies in Hz, strictly increasing, none zero.
    pub freqs_hz: Vec<f64>,
    /// `S(f)` in Φ0²/Hz.
    pub values: Vec<f64>,
    /// Continue the end segments as power laws instead of returning 0.
    #[serde(default)]
    pub extrapolate: bool,
}

impl Tabulated {
    /// Builds the two-sided table from positive-frequency `S⁺` and `S⁻`.
    pub fn from_plus_minus(f_hz: &[f64], s_plus: &[f64], s_minus: &[f64], extrapolate: bool) -> Result<Self> {
        if f_hz.len() != s_plus.len() || f_hz.len() != s_minus.len() {
            return Err(invalid("tabulated", "column lengths differ"));
        }
        let mut freqs = Vec::with_capacity(2 * f_hz.len());
        let mut vals = Vec::with_capacity(2 * f_hz.len());
        for i in (0..f_hz.len()).rev() {
            freqs.push(-f_hz[i]);
            vals.push(0.5 * (s_plus[i] - s_minus[i]));
        }
        for i in 0..f_hz.len() {
            freqs.push(f_hz[i]);
            vals.push(0.5 * (s_plus[i] + s_minus[i]));
        }
        let t = Tabulated {
            freqs_hz: freqs,
            values: vals,
            extrapolate,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.len() != self.values.len() {
            return Err(invalid("values", "length differs from freqs_hz"));
        }
        if self.freqs_hz.is_empty() {
            return Err(invalid("freqs_hz", "empty table"));
        }
        for w in self.freqs_hz.windows(2) {
            if !(w[1] > w[0]) {
                return Err(invalid("freqs_hz", "must be strictly increasing"));
            }
        }
        if self.freqs_hz.iter().any(|f| *f == 0.0 || !f.is_finite()) {
            return Err(invalid("freqs_hz", "entries must be finite and nonzero"));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("values", "entries must be finite and >= 0"));
        }
        Ok(())
    }

    /// Positive-side or negative-side table as `(|f|, S)` ascending in `|f|`.
    fn side(&self, positive: bool) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .freqs_hz
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| (**f > 0.0) == positive)
            .map(|(f, s)| (f.abs(), *s))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    fn eval(&self, f_signed: f64) -> f64 {
        let side = self.side(f_signed > 0.0);
        let f = f_signed.abs();
        interp_loglog(&side, f, self.extrapolate)
    }
}

fn interp_segment(p0: (f64, f64), p1: (f64, f64), f: f64) -> f64 {
    if p0.1 > 0.0 && p1.1 > 0.0 {
        let slope = (p1.1 / p0.1).ln() / (p1.0 / p0.0).ln();
        p0.1 * (f / p0.0).powf(slope)
    } else {
        p0.1 + (p1.1 - p0.1) * (f - p0.0) / (p1.0 - p0.0)
    }
}

fn interp_loglog(side: &[(f64, f64)], f: f64, extrapolate: bool) -> f64 {
    match side.len() {
        0 => 0.0,
        1 => {
            if f == side[0].0 || extrapolate {
                side[0].1
            } else {
                0.0
            }
        }
        n => {
            if f < side[0].0 {
                return if extrapolate { interp_segment(side[0], side[1], f) } else { 0.0 };
            }
            if f > side[n - 1].0 {
                return if extrapolate {
                    interp_segment(side[n - 2], side[n - 1], f)
                } else {
                    0.0
                };
            }
            let i = side.partition_point(|p| p.0 <= f).clamp(1, n - 1);
            interp_segment(side[i - 1], side[i], f)
        }
    }
}

/// Any supported two-sided spectrum, tagged by `"type"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpectralModel {
    Phenomenological(Phenomenological),
    FiniteCutoff(FiniteCutoff),
    DrudeEnsemble(DrudeEnsemble),
    SpinDiffusion(SpinDiffusion),
    Tabulated(Tabulated),
    /// Classical white noise, `S⁺ = level` and `S⁻ = 0`.
    White { level: f64 },
    /// Classical power law, `S⁺ = amplitude²/f^α` with `f` in Hz; `S⁻ = 0`.
    PowerLaw { amplitude_at_1hz: f64, alpha: f64 },
    /// Sum of components.
    Sum { terms: Vec<SpectralModel> },
}

/// One additive piece of a spectrum evaluated at `ω > 0`.
enum Part {
    /// `h(ω)[1+coth(ħω/2k_BT)]` with `h` odd.
    Thermal { h: f64, t_k: f64 },
    /// Symmetric classical noise with the given `S⁺`.
    Classical(f64),
    /// Explicit `S(+f)` and `S(-f)`.
    Pair(f64, f64),
}

impl SpectralModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralModel::Phenomenological(p) => p.validate(),
            SpectralModel::FiniteCutoff(m) => m.validate(),
            SpectralModel::DrudeEnsemble(m) => {
                check_range("amplitude", m.amplitude, 0.0, f64::MAX)?;
                check_positive("t_k", m.t_k)?;
                m.weight.validate()
            }
            SpectralModel::SpinDiffusion(SpinDiffusion::Modes { modes, chi0, t_k }) => {
                if modes.is_empty() {
                    return Err(invalid("modes", "mode list is empty"));
                }
                for m in modes {
                    check_positive("gamma_rad_s", m.gamma_rad_s)?;
                    check_range("b2", m.b2, 0.0, f64::MAX)?;
                }
                check_range("chi0", *chi0, 0.0, f64::MAX)?;
                check_positive("t_k", *t_k)
            }
            SpectralModel::SpinDiffusion(SpinDiffusion::Analytic {
                amplitude,
                alpha,
                omega_max_rad_s,
                t_k,
            }) => {
                check_range("amplitude", *amplitude, 0.0, f64::MAX)?;
                if !(*alpha < 2.0) || !alpha.is_finite() {
                    return Err(invalid("alpha", format!("integrand diverges at 0 for alpha = {alpha} >= 2")));
                }
                check_positive("omega_max_rad_s", *omega_max_rad_s)?;
                check_positive("t_k", *t_k)
            }
            SpectralModel::Tabulated(t) => t.validate(),
            SpectralModel::White { level } => check_range("level", *level, 0.0, f64::MAX),
            SpectralModel::PowerLaw {
                amplitude_at_1hz,
                alpha,
            } => {
                check_range("amplitude_at_1hz", *amplitude_at_1hz, 0.0, f64::MAX)?;
                check_range("alpha", *alpha, 0.0, 2.0)
            }
            SpectralModel::Sum { terms } => {
                if terms.is_empty() {
                    return Err(invalid("terms", "sum has no terms"));
                }
                terms.iter().try_for_each(|t| t.validate())
            }
        }
    }

    /// True for a tabulated (measured) spectrum.
    pub fn is_tabulated(&self) -> bool {
        matches!(self, SpectralModel::Tabulated(_))
    }

    /// Thermal terms and classical `S⁺` at angular frequency `w > 0`.
    fn parts(&self, w: f64, out: &mut Vec<Part>) -> Result<()> {
        match self {
            SpectralModel::Phenomenological(p) => {
                if p.a != 0.0 {
                    out.push(Part::Thermal {
                        h: p.a * w.powf(1.0 - p.alpha),
                        t_k: p.t_a_k,
                    });
                }
                if p.b != 0.0 {
                    out.push(Part::Thermal {
                        h: p.b * w.powf(p.gamma),
                        t_k: p.t_b_k,
                    });
                }
            }
            SpectralModel::FiniteCutoff(m) => {
                let w1 = 2.0 * PI;
                let norm = 2.0 * m.h_raw(w1) * coth(HBAR * w1 / (2.0 * K_B * m.t_k));
                out.push(Part::Thermal {
                    h: m.amplitude * m.amplitude * m.h_raw(w) / norm,
                    t_k: m.t_k,
                });
            }
            SpectralModel::DrudeEnsemble(m) => {
                let w1 = 2.0 * PI;
                let norm = 2.0 * drude_odd_part(&m.weight, w1)? * coth(HBAR * w1 / (2.0 * K_B * m.t_k));
                out.push(Part::Thermal {
                    h: m.amplitude * m.amplitude * drude_odd_part(&m.weight, w)? / norm,
                    t_k: m.t_k,
                });
            }
            SpectralModel::SpinDiffusion(SpinDiffusion::Modes { modes, chi0, t_k }) => {
                let sum: f64 = modes
                    .iter()
                    .map(|m| m.b2 * m.gamma_rad_s / (w * w + m.gamma_rad_s * m.gamma_rad_s))
                    .sum();
                out.push(Part::Thermal {
                    h: HBAR * w * chi0 * sum,
                    t_k: *t_k,
                });
            }
            SpectralModel::SpinDiffusion(SpinDiffusion::Analytic {
                amplitude,
                alpha,
                omega_max_rad_s,
                t_k,
            }) => {
                let raw = |w: f64| -> Result<f64> {
                    Ok(HBAR * w / (K_B * t_k) * spin_diffusion_integral(*alpha, *omega_max_rad_s, w)?)
                };
                let w1 = 2.0 * PI;
                let norm = 2.0 * raw(w1)? * coth(HBAR * w1 / (2.0 * K_B * t_k));
                out.push(Part::Thermal {
                    h: amplitude * amplitude * raw(w)? / norm,
                    t_k: *t_k,
                });
            }
            SpectralModel::Tabulated(t) => {
                let f = w / (2.0 * PI);
                out.push(Part::Pair(t.eval(f), t.eval(-f)));
            }
            SpectralModel::White { level } => out.push(Part::Classical(*level)),
            SpectralModel::PowerLaw {
                amplitude_at_1hz,
                alpha,
            } => {
                let f = w / (2.0 * PI);
                out.push(Part::Classical(amplitude_at_1hz * amplitude_at_1hz * f.powf(-alpha)));
            }
            SpectralModel::Sum { terms } => {
                for t in terms {
                    t.parts(w, out)?;
                }
            }
        }
        Ok(())
    }

    fn check_freq(f: f64) -> Result<()> {
        if f == 0.0 {
            return Err(Error::OutOfRange("spectrum evaluated at f = 0 (1/f divergence)".into()));
        }
        if !f.is_finite() {
            return Err(invalid("f_hz", "must be finite"));
        }
        Ok(())
    }

    /// `S(f)` at a signed frequency in Hz.
    pub fn two_sided(&self, f_signed_hz: f64) -> Result<f64> {
        Self::check_freq(f_signed_hz)?;
        let w = 2.0 * PI * f_signed_hz.abs();
        let pos = f_signed_hz > 0.0;
        let mut parts = Vec::new();
        self.parts(w, &mut parts)?;
        let mut s = 0.0;
        for p in parts {
            s += match p {
                Part::Thermal { h, t_k } => {
                    let x = HBAR * w / (2.0 * K_B * t_k);
                    if pos {
                        h * one_plus_coth(x)
                    } else {
                        -h * one_plus_coth(-x)
                    }
                }
                Part::Classical(sp) => 0.5 * sp,
                Part::Pair(a, b) => {
                    if pos {
                        a
                    } else {
                        b
                    }
                }
            };
        }
        Ok(s)
    }

    /// `(S⁺(f), S⁻(f))` for `f > 0` in Hz.
    pub fn plus_minus(&self, f_hz: f64) -> Result<(f64, f64)> {
        Self::check_freq(f_hz)?;
        if !(f_hz > 0.0) {
            return Err(invalid("f_hz", "S± are defined for f > 0"));
        }
        let w = 2.0 * PI * f_hz;
        let mut parts = Vec::new();
        self.parts(w, &mut parts)?;
        let (mut sp, mut sm) = (0.0, 0.0);
        for p in parts {
            match p {
                Part::Thermal { h, t_k } => {
                    let x = HBAR * w / (2.0 * K_B * t_k);
                    sp += 2.0 * h * coth(x);
                    sm += 2.0 * h;
                }
                Part::Classical(v) => sp += v,
                Part::Pair(a, b) => {
                    sp += a + b;
                    sm += a - b;
                }
            }
        }
        Ok((sp, sm))
    }

    pub fn s_plus(&self, f_hz: f64) -> Result<f64> {
        Ok(self.plus_minus(f_hz)?.0)
    }

    pub fn s_minus(&self, f_hz: f64) -> Result<f64> {
        Ok(self.plus_minus(f_hz)?.1)
    }
}

/// `S⁻ = S⁺·tanh(hf/2k_BT)`.
pub fn fdt_pair(s_plus: f64, f_hz: f64, t_k: f64) -> Result<f64> {
    check_positive("t_k", t_k)?;
    check_positive("f_hz", f_hz)?;
    Ok(s_plus * crate::constants::thermal_tanh(f_hz, t_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::H;

    fn pheno_a_only(alpha: f64, t: f64) -> SpectralModel {
        SpectralModel::Phenomenological(Phenomenological {
            a: 1e-12,
            alpha,
            t_a_k: t,
            b: 0.0,
            gamma: 3.0,
            t_b_k: t,
        })
    }

    fn local_slope(m: &SpectralModel, f: f64) -> f64 {
        let r = 1.01;
        let a = m.s_plus(f / r).unwrap();
        let b = m.s_plus(f * r).unwrap();
        (b / a).ln() / (r * r).ln()
    }

    #[test]
    fn s_minus_constant_for_one_over_f() {
        let m = pheno_a_only(1.0, 0.03);
        for &f in &[1.0, 1e3, 1e6, 1e8] {
            let sm = m.s_minus(f).unwrap();
            assert!((sm / 2e-12 - 1.0).abs() < 1e-9, "f = {f}: {sm}");
        }
    }

    #[test]
    fn detailed_balance_each_model() {
        let t = 0.05;
        let models = [
            pheno_a_only(0.8, t),
            SpectralModel::FiniteCutoff(FiniteCutoff {
                amplitude: 5e-6,
                t_k: t,
                tau_min_s: 1e-10,
                tau_max_s: 1e4,
            }),
            SpectralModel::SpinDiffusion(SpinDiffusion::Modes {
                modes: vec![DiffusionMode {
                    b2: 1.0,
                    gamma_rad_s: 1e9,
                }],
                chi0: 1e10,
                t_k: t,
            }),
        ];
        for m in &models {
            for &f in &[1e6, 1e8, 1e9, 5e9, 2e10] {
                let r = m.two_sided(f).unwrap() / m.two_sided(-f).unwrap();
                let expect = (H * f / (K_B * t)).exp();
                assert!((r / expect - 1.0).abs() < 1e-10, "{m:?} f={f}");
            }
        }
    }

    #[test]
    fn one_over_f_amplitude_anchor() {
        let a = Phenomenological::a_from_amplitude(5e-6, 1.0, 0.03);
        let m = SpectralModel::Phenomenological(Phenomenological {
            a,
            alpha: 1.0,
            t_a_k: 0.03,
            b: 0.0,
            gamma: 1.0,
            t_b_k: 0.03,
        });
        assert!((m.s_plus(1.0).unwrap() / 2.5e-11 - 1.0).abs() < 1e-12);
        assert!((m.s_plus(10.0).unwrap() / 2.5e-12 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn resistance_round_trip() {
        let b = Phenomenological::b_from_resistance(20e6, 600e-12);
        assert!((Phenomenological::resistance_from_b(b, 600e-12) - 20e6).abs() < 1e-6);
        // S⁺ = 2ħL²ω coth/R in Wb²/Hz, divided by Φ0².
        let m = SpectralModel::Phenomenological(Phenomenological {
            a: 0.0,
            alpha: 1.0,
            t_a_k: 0.03,
            b,
            gamma: 1.0,
            t_b_k: 0.03,
        });
        let f = 5e9;
        let w = 2.0 * PI * f;
        let direct = 2.0 * HBAR * 600e-12f64.powi(2) * w * coth(HBAR * w / (2.0 * K_B * 0.03)) / 20e6 / PHI0 / PHI0;
        assert!((m.s_plus(f).unwrap() / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_cutoff_matches_quadrature() {
        let fc = FiniteCutoff {
            amplitude: 1.0,
            t_k: 0.03,
            tau_min_s: 1e-11,
            tau_max_s: 1e3,
        };
        let wgt = DrudeWeight::InverseTau {
            tau_min_s: fc.tau_min_s,
            tau_max_s: fc.tau_max_s,
        };
        for i in 0..60 {
            let f = 10f64.powf(-2.0 + 13.0 * i as f64 / 59.0);
            for &s in &[1.0, -1.0] {
                let w = s * 2.0 * PI * f;
                let x = HBAR * w / (2.0 * K_B * fc.t_k);
                let closed = fc.h_raw(w) * one_plus_coth(x);
                let quad = drude_ensemble_quadrature(&wgt, fc.t_k, w).unwrap();
                assert!((quad / closed - 1.0).abs() < 1e-6, "f = {f}");
            }
        }
    }

    #[test]
    fn finite_cutoff_normalized_at_one_hz() {
        let m = SpectralModel::FiniteCutoff(FiniteCutoff {
            amplitude: 5e-6,
            t_k: 0.03,
            tau_min_s: 1e-11,
            tau_max_s: 1e3,
        });
        assert!((m.s_plus(1.0).unwrap() / 2.5e-11 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drude_delta_is_lorentzian() {
        let tau = 1e-3;
        let w = 700.0;
        let t = 0.03;
        let v = drude_ensemble_quadrature(&DrudeWeight::Delta { tau_s: tau }, t, w).unwrap();
        let x = HBAR * w / (2.0 * K_B * t);
        let expect = HBAR / t * one_plus_coth(x) * w * tau / (1.0 + w * w * tau * tau);
        assert!((v / expect - 1.0).abs() < 1e-14);
    }

    #[test]
    fn drude_inverse_tau_gives_one_over_f() {
        let m = SpectralModel::DrudeEnsemble(DrudeEnsemble {
            amplitude: 1.0,
            t_k: 0.1,
            weight: DrudeWeight::InverseTau {
                tau_min_s: 1e-12,
                tau_max_s: 1e6,
            },
        });
        let s = local_slope(&m, 1e2);
        assert!((s + 1.0).abs() < 0.01, "{s}");
    }

    #[test]
    fn drude_below_low_cutoff_crossover_is_one_over_f2() {
        // ω_max/2π = 1 MHz, far below k_BT/h ≈ 2 GHz at 100 mK.
        let m = SpectralModel::DrudeEnsemble(DrudeEnsemble {
            amplitude: 1.0,
            t_k: 0.1,
            weight: DrudeWeight::InverseTau {
                tau_min_s: 1.0 / (2.0 * PI * 1e6),
                tau_max_s: 1e6,
            },
        });
        let s = local_slope(&m, 1e8);
        assert!((s + 2.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn finite_cutoff_intermediate_regime() {
        let t = 0.05;
        let wmax = 3.0 * K_B * t / HBAR;
        let m = SpectralModel::FiniteCutoff(FiniteCutoff {
            amplitude: 1.0,
            t_k: t,
            tau_min_s: 1.0 / wmax,
            tau_max_s: 1e4,
        });
        let fc = 2.0 * K_B * t / H;
        for i in 0..=40 {
            let f = fc * 10f64.powf(-1.0 + 2.0 * i as f64 / 40.0);
            let s = local_slope(&m, f);
            assert!((-1.3..=-0.7).contains(&s), "f = {f}, slope {s}");
        }
    }

    #[test]
    fn spin_diffusion_single_mode_is_lorentzian() {
        let g = 3e5;
        let m = SpectralModel::SpinDiffusion(SpinDiffusion::Modes {
            modes: vec![DiffusionMode { b2: 2.0, gamma_rad_s: g }],
            chi0: 1.0,
            t_k: 0.03,
        });
        let f = 1e4;
        let w = 2.0 * PI * f;
        let x = HBAR * w / (2.0 * K_B * 0.03);
        let expect = HBAR * w * 2.0 * g / (w * w + g * g) * one_plus_coth(x);
        assert!((m.two_sided(f).unwrap() / expect - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spin_diffusion_integral_closed_form_alpha_one() {
        // Without the cutoff, ∫ x/(ω²+x⁴) dx = π/(4ω).
        let w = 50.0;
        let v = spin_diffusion_integral(1.0, 1e40, w).unwrap();
        assert!((v / (PI / (4.0 * w)) - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn spin_diffusion_analytic_slope() {
        let m = SpectralModel::SpinDiffusion(SpinDiffusion::Analytic {
            amplitude: 1.0,
            alpha: 1.0,
            omega_max_rad_s: 1e12,
            t_k: 0.05,
        });
        let s = local_slope(&m, 1e3);
        assert!((s + 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn spin_diffusion_rejects_alpha_two() {
        assert!(spin_diffusion_integral(2.0, 1e5, 10.0).is_err());
    }

    #[test]
    fn diffusion_cutoff_conventions() {
        let w = diffusion_omega_max(1e9, 100.0);
        assert!((w - 1e5).abs() < 1e-6);
        assert!((w / (2.0 * PI) - 1.5915e4).abs() < 1.0);
    }

    #[test]
    fn fdt_limits() {
        let t = 0.03;
        let f_hi = 40.0 * K_B * t / H;
        assert!((fdt_pair(1.0, f_hi, t).unwrap() - 1.0).abs() < 1e-6);
        let f_lo = 1e-4 * K_B * t / H;
        assert!((fdt_pair(1.0, f_lo, t).unwrap() / (H * f_lo / (2.0 * K_B * t)) - 1.0).abs() < 1e-8);
        assert!((fdt_pair(1.0, 1e9, 0.03).unwrap() - 0.6640).abs() < 5e-5);
        assert!(fdt_pair(1.0, 1e9, 0.0).is_err());
    }

    #[test]
    fn tabulated_loglog_and_extrapolation() {
        let t = Tabulated::from_plus_minus(&[1.0, 10.0, 100.0], &[1.0, 0.1, 0.01], &[0.5, 0.05, 0.005], false).unwrap();
        let m = SpectralModel::Tabulated(t.clone());
        let (sp, sm) = m.plus_minus(3.0).unwrap();
        assert!((sp - 1.0 / 3.0).abs() < 1e-12);
        assert!((sm - 0.5 / 3.0).abs() < 1e-12);
        assert_eq!(m.s_plus(1000.0).unwrap(), 0.0);
        let m2 = SpectralModel::Tabulated(Tabulated { extrapolate: true, ..t });
        assert!((m2.s_plus(1000.0).unwrap() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_frequency_rejected() {
        assert!(pheno_a_only(1.0, 0.03).two_sided(0.0).is_err());
    }

    #[test]
    fn json_tagging() {
        let m = pheno_a_only(1.0, 0.03);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"phenomenological\""));
        let back: SpectralModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
