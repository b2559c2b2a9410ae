//! Two-sided spectra and effective temperatures from qubit relaxation, and
//! weighted fits of spectral models to the extracted points.


use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{H, HBAR, K_B, PHI0};
use crate::error::{check_positive, invalid, Error, Result};
use crate::models::{FiniteCutoff, Phenomenological, SpectralModel};
use crate::optim::{nelder_mead, NmOptions};
use crate::rng::task_rng;

/// One relaxation measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitOperatingPoint {
    pub f10_hz: f64,
    pub t1_s: f64,
    pub p_stray: f64,
    /// `|⟨0|Φ̂|1⟩|`, Wb.
    pub matrix_element_wb: f64,
    pub l_h: f64,
}

impl QubitOperatingPoint {
    pub fn validate(&self) -> Result<()> {
        check_positive("f10_hz", self.f10_hz)?;
        check_positive("t1_s", self.t1_s)?;
        check_positive("matrix_element_wb", self.matrix_element_wb)?;
        check_positive("l_h", self.l_h)?;
        if !(self.p_stray >= 0.0) {
            return Err(invalid("p_stray", format!("must be >= 0, got {}", self.p_stray)));
        }
        if self.p_stray > 0.5 {
            return Err(invalid(
                "p_stray",
                format!("{} > 0.5 implies population inversion (non-equilibrium input)", self.p_stray),
            ));
        }
        Ok(())
    }

    /// Persistent current `|⟨0|Φ̂|1⟩|/L`, A.
    pub fn persistent_current(&self) -> f64 {
        self.matrix_element_wb / self.l_h
    }
}

/// `S⁺` and `S⁻` at `f10`, Φ0²/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSpectra {
    pub f_hz: f64,
    pub s_plus: f64,
    pub s_minus: f64,
}

/// `S⁺ = ħ²L²/(T1|⟨0|Φ̂|1⟩|²)` and `S⁻ = (1-2p)S⁺`.
pub fn spectra_from_relaxation(pt: &QubitOperatingPoint) -> Result<ExtractedSpectra> {
    pt.validate()?;
    let ratio = pt.l_h / pt.matrix_element_wb;
    let s_plus_wb2 = HBAR * HBAR * ratio * ratio / pt.t1_s;
    let s_plus = s_plus_wb2 / (PHI0 * PHI0);
    Ok(ExtractedSpectra {
        f_hz: pt.f10_hz,
        s_plus,
        s_minus: (1.0 - 2.0 * pt.p_stray) * s_plus,
    })
}

/// Decay and excitation rates implied by extracted spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma_down: f64,
    pub gamma_up: f64,
}

impl Rates {
    pub fn t1(&self) -> f64 {
        1.0 / (self.gamma_down + self.gamma_up)
    }
    pub fn p_stray(&self) -> f64 {
        self.gamma_up / (self.gamma_down + self.gamma_up)
    }
}

/// Golden-rule rates `Γ↓ = (I_p/ħ)²·S(+f)`, `Γ↑ = (I_p/ħ)²·S(-f)` with the
/// two-sided values recovered from `S±` (flux in Wb).
pub fn rates_from_spectra(s: &ExtractedSpectra, matrix_element_wb: f64, l_h: f64) -> Rates {
    let c = (matrix_element_wb / (HBAR * l_h)).powi(2) * PHI0 * PHI0;
    Rates {
        gamma_down: c * 0.5 * (s.s_plus + s.s_minus),
        gamma_up: c * 0.5 * (s.s_plus - s.s_minus),
    }
}

/// `T_eff = (h f10/k_B)/ln((1-p)/p)`.
pub fn effective_temperature(f10_hz: f64, p_stray: f64) -> Result<f64> {
    check_positive("f10_hz", f10_hz)?;
    if p_stray <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "p_stray = {p_stray}: zero-temperature limit, T_eff -> 0 K"
        )));
    }
    if p_stray >= 0.5 {
        return Err(Error::OutOfRange(format!(
            "p_stray = {p_stray}: infinite-temperature limit, T_eff unbounded"
        )));
    }
    Ok(H * f10_hz / K_B / ((1.0 - p_stray) / p_stray).ln())
}

/// A point in a spectral fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub f_hz: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    /// Standard error of `ln S⁺`.
    pub sigma_ln_s_plus: f64,
    /// Standard error of `S⁻/S⁺`.
    pub sigma_ratio: f64,
}

/// Default relative T1 uncertainty when none is supplied.
pub const DEFAULT_T1_REL_UNCERTAINTY: f64 = 0.10;
/// Default absolute `p_stray` uncertainty when none is supplied.
pub const DEFAULT_P_STRAY_UNCERTAINTY: f64 = 0.01;

/// Fit points from operating points; `σ(ln S⁺) = σ_T1/T1`, `σ(S⁻/S⁺) = 2σ_p`.
pub fn fit_points_from_operating_points(
    pts: &[QubitOperatingPoint],
    t1_rel_uncertainty: f64,
    p_stray_uncertainty: f64,
) -> Result<Vec<FitPoint>> {
    check_positive("t1_rel_uncertainty", t1_rel_uncertainty)?;
    check_positive("p_stray_uncertainty", p_stray_uncertainty)?;
    pts.iter()
        .map(|p| {
            let s = spectra_from_relaxation(p)?;
            Ok(FitPoint {
                f_hz: s.f_hz,
                s_plus: s.s_plus,
                s_minus: s.s_minus,
                sigma_ln_s_plus: t1_rel_uncertainty,
                sigma_ratio: 2.0 * p_stray_uncertainty,
            })
        })
        .collect()
}

/// `n` log-spaced points in `[f_lo_hz, f_hi_hz]` drawn from `model`, with
/// independent relative Gaussian errors of size `rel_noise` on `S(+f)` and
/// `S(-f)`. The standard errors are propagated to `ln S⁺` and `S⁻/S⁺`.
pub fn synthetic_fit_points(
    model: &SpectralModel,
    f_lo_hz: f64,
    f_hi_hz: f64,
    n: usize,
    rel_noise: f64,
    seed: u64,
) -> Result<Vec<FitPoint>> {
    model.validate()?;
    check_positive("f_lo_hz", f_lo_hz)?;
    if !(f_hi_hz > f_lo_hz) {
        return Err(invalid("f_hi_hz", "must exceed f_lo_hz"));
    }
    if n < 2 {
        return Err(invalid("n_points", "need at least 2 points"));
    }
    check_positive("rel_noise", rel_noise)?;
    let mut rng = task_rng(seed, 0);
    (0..n)
        .map(|i| {
            let f = f_lo_hz * (f_hi_hz / f_lo_hz).powf(i as f64 / (n - 1) as f64);
            let (sp, sm) = model.plus_minus(f)?;
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let up = 0.5 * (sp + sm) * (1.0 + rel_noise * e1);
            let dn = 0.5 * (sp - sm) * (1.0 + rel_noise * e2);
            let (p, m) = (up + dn, up - dn);
            if !(p > 0.0) {
                return Err(invalid("rel_noise", "too large: a noisy S+ came out non-positive"));
            }
            let (wu, wd) = (up / p, dn / p);
            Ok(FitPoint {
                f_hz: f,
                s_plus: p,
                s_minus: m,
                sigma_ln_s_plus: rel_noise * (wu * wu + wd * wd).sqrt(),
                sigma_ratio: (2.0 * std::f64::consts::SQRT_2 * rel_noise * wu * wd).max(1e-6),
            })
        })
        .collect()
}

/// Model family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Parameters `a, alpha, t_a_k, b, gamma, t_b_k`.
    Phenomenological,
    /// Parameters `amplitude, t_k, tau_min_s, tau_max_s`.
    FiniteCutoff,
}

impl Family {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Phenomenological => &["a", "alpha", "t_a_k", "b", "gamma", "t_b_k"],
            Family::FiniteCutoff => &["amplitude", "t_k", "tau_min_s", "tau_max_s"],
        }
    }

    fn transform(&self, i: usize) -> Transform {
        match (self, i) {
            (Family::Phenomenological, 1) => Transform::Logit(0.01, 1.99),
            (Family::Phenomenological, 4) => Transform::Logit(1.0, 5.0),
            _ => Transform::Log,
        }
    }

    /// Builds the model from natural parameter values.
    pub fn model(&self, p: &[f64]) -> SpectralModel {
        match self {
            Family::Phenomenological => SpectralModel::Phenomenological(Phenomenological {
                a: p[0],
                alpha: p[1],
                t_a_k: p[2],
                b: p[3],
                gamma: p[4],
                t_b_k: p[5],
            }),
            Family::FiniteCutoff => SpectralModel::FiniteCutoff(FiniteCutoff {
                amplitude: p[0],
                t_k: p[1],
                tau_min_s: p[2],
                tau_max_s: p[3],
            }),
        }
    }

    /// Natural parameters of a model of this family.
    pub fn params_of(&self, m: &SpectralModel) -> Result<Vec<f64>> {
        match (self, m) {
            (Family::Phenomenological, SpectralModel::Phenomenological(p)) => {
                Ok(vec![p.a, p.alpha, p.t_a_k, p.b, p.gamma, p.t_b_k])
            }
            (Family::FiniteCutoff, SpectralModel::FiniteCutoff(p)) => {
                Ok(vec![p.amplitude, p.t_k, p.tau_min_s, p.tau_max_s])
            }
            _ => Err(invalid("init", "model type does not match the fit family")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Transform {
    Log,
    Logit(f64, f64),
}

impl Transform {
    fn to_t(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Logit(lo, hi) => {
                let u = ((v - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
                (u / (1.0 - u)).ln()
            }
        }
    }
    fn to_nat(self, t: f64) -> f64 {
        match self {
            Transform::Log => t.exp(),
            Transform::Logit(lo, hi) => lo + (hi - lo) / (1.0 + (-t).exp()),
        }
    }
    /// `d nat / d t`.
    fn jac(self, t: f64) -> f64 {
        match self {
            Transform::Log => t.exp(),
            Transform::Logit(lo, hi) => {
                let s = 1.0 / (1.0 + (-t).exp());
                (hi - lo) * s * (1.0 - s)
            }
        }
    }
}

/// Fit controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub starts: usize,
    /// Log-uniform perturbation range for multi-start, as a multiplicative factor.
    pub perturbation: f64,
    pub seed: u64,
    pub max_evals: usize,
    /// Points with `|f - center| < half_width` are excluded, Hz.
    pub notch_hz: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 8,
            perturbation: 3.0,
            seed: 0,
            max_evals: 20_000,
            notch_hz: Some((1.4e9, 50e6)),
        }
    }
}

/// Per-point residuals (model minus data), unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub f_hz: f64,
    pub ln_s_plus: f64,
    pub ratio: f64,
}

/// Outcome of a single-group fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub model: SpectralModel,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub free: Vec<bool>,
    /// Covariance of the free parameters in natural units, ordered as in `param_names`.
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<Residual>,
    pub objective: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.params[i])
    }
}

fn apply_notch(points: &[FitPoint], notch: Option<(f64, f64)>) -> Vec<FitPoint> {
    points
        .iter()
        .filter(|p| match notch {
            Some((c, w)) => (p.f_hz - c).abs() >= w,
            None => true,
        })
        .copied()
        .collect()
}

fn check_points(points: &[FitPoint], n_free: usize) -> Result<()> {
    if points.len() < n_free + 1 {
        return Err(invalid(
            "points",
            format!("{} points for {} free parameters (need at least {})", points.len(), n_free, n_free + 1),
        ));
    }
    for p in points {
        check_positive("f_hz", p.f_hz)?;
        check_positive("s_plus", p.s_plus)?;
        check_positive("sigma_ln_s_plus", p.sigma_ln_s_plus)?;
        check_positive("sigma_ratio", p.sigma_ratio)?;
        if !p.s_minus.is_finite() {
            return Err(invalid("s_minus", "must be finite"));
        }
    }
    let f0 = points[0].f_hz;
    if points.iter().all(|p| p.f_hz == f0) {
        return Err(invalid("points", "all points share one frequency (degenerate)"));
    }
    Ok(())
}

/// Weighted residual vector for one model.
fn weighted_residuals(model: &SpectralModel, points: &[FitPoint], out: &mut Vec<f64>) -> bool {
    for p in points {
        match model.plus_minus(p.f_hz) {
            Ok((sp, sm)) if sp > 0.0 && sp.is_finite() => {
                out.push((sp.ln() - p.s_plus.ln()) / p.sigma_ln_s_plus);
                out.push((sm / sp - p.s_minus / p.s_plus) / p.sigma_ratio);
            }
            _ => return false,
        }
    }
    true
}

fn objective(model: &SpectralModel, points: &[FitPoint], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    if !weighted_residuals(model, points, buf) {
        return f64::INFINITY;
    }
    buf.iter().map(|r| r * r).sum()
}

/// Layout mapping a flat transformed vector onto per-group natural parameters.
struct Layout {
    family: Family,
    /// Per group: natural values (frozen entries fixed).
    base: Vec<Vec<f64>>,
    /// Entries of the flat vector: (group or None for shared, param index).
    slots: Vec<(Option<usize>, usize)>,
}

impl Layout {
    fn unpack(&self, t: &[f64]) -> Vec<Vec<f64>> {
        let mut out = self.base.clone();
        for (&(g, i), &v) in self.slots.iter().zip(t) {
            let nat = self.family.transform(i).to_nat(v);
            match g {
                Some(g) => out[g][i] = nat,
                None => out.iter_mut().for_each(|p| p[i] = nat),
            }
        }
        out
    }

    fn pack(&self, nat: &[Vec<f64>]) -> Vec<f64> {
        self.slots
            .iter()
            .map(|&(g, i)| self.family.transform(i).to_t(nat[g.unwrap_or(0)][i]))
            .collect()
    }

    fn objective(&self, t: &[f64], groups: &[Vec<FitPoint>], buf: &mut Vec<f64>) -> f64 {
        let nat = self.unpack(t);
        nat.iter()
            .zip(groups)
            .map(|(p, pts)| objective(&self.family.model(p), pts, buf))
            .sum()
    }

    fn residuals(&self, t: &[f64], groups: &[Vec<FitPoint>]) -> Option<Vec<f64>> {
        let nat = self.unpack(t);
        let mut r = Vec::new();
        for (p, pts) in nat.iter().zip(groups) {
            if !weighted_residuals(&self.family.model(p), pts, &mut r) {
                return None;
            }
        }
        Some(r)
    }
}

/// Multi-start simplex minimization of a layout's objective.
fn multistart(layout: &Layout, groups: &[Vec<FitPoint>], t0: &[f64], opts: &FitOptions) -> (Vec<f64>, f64, bool, usize) {
    let starts = opts.starts.max(1);
    let spread = opts.perturbation.max(1.0).ln();
    let nm = NmOptions {
        max_evals: opts.max_evals,
        ..NmOptions::default()
    };
    let runs: Vec<_> = (0..starts as u64)
        .into_par_iter()
        .map(|k| {
            let mut x = t0.to_vec();
            if k > 0 {
                let mut rng = task_rng(opts.seed, k);
                for (v, &(_, i)) in x.iter_mut().zip(&layout.slots) {
                    let u: f64 = rng.gen_range(-1.0..1.0);
                    *v += match layout.family.transform(i) {
                        Transform::Log => u * spread,
                        Transform::Logit(..) => u,
                    };
                }
            }
            let mut buf = Vec::new();
            nelder_mead(|t| layout.objective(t, groups, &mut buf), &x, &nm)
        })
        .collect();
    let evals = runs.iter().map(|r| r.evals).sum();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one start");
    (best.x, best.f, best.converged, evals)
}

/// Covariance of the flat transformed vector, mapped to natural units.
fn covariance(layout: &Layout, groups: &[Vec<FitPoint>], t: &[f64]) -> Vec<Vec<f64>> {
    let n = t.len();
    if n == 0 {
        return vec![];
    }
    let Some(r0) = layout.residuals(t, groups) else {
        return vec![vec![f64::NAN; n]; n];
    };
    let m = r0.len();
    let mut jac = DMatrix::<f64>::zeros(m, n);
    for j in 0..n {
        let h = 1e-5 * t[j].abs().max(1.0);
        let mut tp = t.to_vec();
        let mut tm = t.to_vec();
        tp[j] += h;
        tm[j] -= h;
        match (layout.residuals(&tp, groups), layout.residuals(&tm, groups)) {
            (Some(rp), Some(rm)) => {
                for i in 0..m {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            _ => return vec![vec![f64::NAN; n]; n],
        }
    }
    let jtj = jac.transpose() * &jac;
    let cov_t = match jtj.clone().pseudo_inverse(1e-12 * jtj.norm()) {
        Ok(c) => c,
        Err(_) => return vec![vec![f64::NAN; n]; n],
    };
    let d: Vec<f64> = layout
        .slots
        .iter()
        .zip(t)
        .map(|(&(_, i), &v)| layout.family.transform(i).jac(v))
        .collect();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| 0.5 * (cov_t[(a, b)] + cov_t[(b, a)]) * d[a] * d[b])
                .collect()
        })
        .collect()
}

fn residual_rows(model: &SpectralModel, points: &[FitPoint]) -> Vec<Residual> {
    points
        .iter()
        .map(|p| {
            let (sp, sm) = model.plus_minus(p.f_hz).unwrap_or((f64::NAN, f64::NAN));
            Residual {
                f_hz: p.f_hz,
                ln_s_plus: sp.ln() - p.s_plus.ln(),
                ratio: sm / sp - p.s_minus / p.s_plus,
            }
        })
        .collect()
}

fn check_init(family: Family, init: &[f64], frozen: &[bool]) -> Result<()> {
    let names = family.param_names();
    if init.len() != names.len() || frozen.len() != names.len() {
        return Err(invalid("init", format!("expected {} parameters", names.len())));
    }
    for (i, (&v, &fz)) in init.iter().zip(frozen).enumerate() {
        if fz {
            if !v.is_finite() {
                return Err(invalid("init", format!("frozen {} is not finite", names[i])));
            }
            continue;
        }
        let ok = match family.transform(i) {
            Transform::Log => v > 0.0 && v.is_finite(),
            Transform::Logit(lo, hi) => v > lo && v < hi,
        };
        if !ok {
            return Err(invalid("init", format!("{} = {} is outside the fit domain", names[i], v)));
        }
    }
    family.model(init).validate()
}

/// Weighted least-squares fit on `ln S⁺` and `S⁻/S⁺`.
///
/// `frozen[i]` keeps parameter `i` at its `init` value. Non-convergence is
/// reported through `converged`, with the best point found.
pub fn fit_model(points: &[FitPoint], family: Family, init: &SpectralModel, frozen: &[bool], opts: &FitOptions) -> Result<FitResult> {
    let init_p = family.params_of(init)?;
    check_init(family, &init_p, frozen)?;
    let pts = apply_notch(points, opts.notch_hz);
    let n_free = frozen.iter().filter(|f| !**f).count();
    check_points(&pts, n_free)?;
    let layout = Layout {
        family,
        base: vec![init_p.clone()],
        slots: (0..init_p.len()).filter(|&i| !frozen[i]).map(|i| (Some(0), i)).collect(),
    };
    let groups = vec![pts];
    let t0 = layout.pack(&layout.base);
    let (t, f, conv, evals) = multistart(&layout, &groups, &t0, opts);
    let params = layout.unpack(&t).remove(0);
    let model = family.model(&params);
    Ok(FitResult {
        family,
        residuals: residual_rows(&model, &groups[0]),
        covariance: covariance(&layout, &groups, &t),
        model,
        param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
        params,
        free: frozen.iter().map(|f| !f).collect(),
        objective: f,
        converged: conv && f.is_finite(),
        evaluations: evals,
    })
}

/// Outcome of a simultaneous fit with shared parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiFitResult {
    pub family: Family,
    pub param_names: Vec<String>,
    pub shared: Vec<String>,
    pub models: Vec<SpectralModel>,
    pub params: Vec<Vec<f64>>,
    /// Labels of the flat free-parameter vector, e.g. `alpha` or `a[2]`.
    pub free_labels: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<Residual>>,
    pub objective: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Simultaneous fit of several groups (e.g. temperatures) sharing the named
/// parameters.
///
/// Each group is first fitted on its own; shared parameters then start at the
/// mean of those estimates and a multi-start simplex runs over all free
/// parameters jointly.
pub fn fit_shared(
    groups: &[Vec<FitPoint>],
    family: Family,
    inits: &[SpectralModel],
    frozen: &[bool],
    shared: &[&str],
    opts: &FitOptions,
) -> Result<MultiFitResult> {
    if groups.is_empty() || groups.len() != inits.len() {
        return Err(invalid("inits", "need one initial model per group"));
    }
    let names = family.param_names();
    let shared_idx: Vec<usize> = shared
        .iter()
        .map(|s| {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| invalid("shared", format!("unknown parameter `{s}`")))
        })
        .collect::<Result<_>>()?;
    let mut base = Vec::new();
    for m in inits {
        let p = family.params_of(m)?;
        check_init(family, &p, frozen)?;
        base.push(p);
    }
    let pts: Vec<Vec<FitPoint>> = groups.iter().map(|g| apply_notch(g, opts.notch_hz)).collect();
    let local_idx: Vec<usize> = (0..names.len())
        .filter(|i| !frozen[*i] && !shared_idx.contains(i))
        .collect();
    for g in &pts {
        check_points(g, local_idx.len() + 1)?;
    }
    let shared_free: Vec<usize> = shared_idx.iter().copied().filter(|i| !frozen[*i]).collect();

    // Independent fits seed the joint problem; shared values start at the
    // mean of the per-group estimates in transformed coordinates.
    let mut evals = 0usize;
    let mut locals = Vec::with_capacity(pts.len());
    for (g, p0) in pts.iter().zip(&base) {
        let own: Vec<usize> = (0..names.len()).filter(|i| !frozen[*i]).collect();
        let layout = Layout {
            family,
            base: vec![p0.clone()],
            slots: own.iter().map(|&i| (Some(0), i)).collect(),
        };
        let t0 = layout.pack(&layout.base);
        let (t, _, _, e) = multistart(&layout, std::slice::from_ref(g), &t0, opts);
        evals += e;
        locals.push(layout.unpack(&t).remove(0));
    }
    for &i in &shared_free {
        let tr = family.transform(i);
        let mean = locals.iter().map(|p| tr.to_t(p[i])).sum::<f64>() / locals.len() as f64;
        for p in locals.iter_mut() {
            p[i] = tr.to_nat(mean);
        }
    }
    for &i in &shared_idx {
        if frozen[i] {
            for p in locals.iter_mut() {
                p[i] = base[0][i];
            }
        }
    }

    // Joint polish over every free parameter.
    let mut slots: Vec<(Option<usize>, usize)> = shared_free.iter().map(|&i| (None, i)).collect();
    for g in 0..pts.len() {
        slots.extend(local_idx.iter().map(|&i| (Some(g), i)));
    }
    let joint = Layout {
        family,
        base: locals,
        slots,
    };
    let t0 = joint.pack(&joint.base);
    let polish_opts = FitOptions {
        max_evals: opts.max_evals.max(40_000),
        ..opts.clone()
    };
    let (t, f, conv, e2) = multistart(&joint, &pts, &t0, &polish_opts);
    evals += e2;
    let params = joint.unpack(&t);
    let models: Vec<SpectralModel> = params.iter().map(|p| family.model(p)).collect();
    let free_labels = joint
        .slots
        .iter()
        .map(|&(g, i)| match g {
            Some(g) => format!("{}[{}]", names[i], g),
            None => names[i].to_string(),
        })
        .collect();
    Ok(MultiFitResult {
        family,
        param_names: names.iter().map(|s| s.to_string()).collect(),
        shared: shared.iter().map(|s| s.to_string()).collect(),
        residuals: models.iter().zip(&pts).map(|(m, g)| residual_rows(m, g)).collect(),
        covariance: covariance(&joint, &pts, &t),
        models,
        params,
        free_labels,
        objective: f,
        converged: conv && f.is_finite(),
        evaluations: evals,
    })
}

/// Parallel resistance equivalent to an ohmic (`γ = 1`) term, Ω.
pub fn ohmic_resistance(model: &SpectralModel, l_h: f64) -> Option<f64> {
    match model {
        SpectralModel::Phenomenological(p) if p.gamma == 1.0 && p.b > 0.0 => {
            Some(Phenomenological::resistance_from_b(p.b, l_h))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(t1: f64, p: f64) -> QubitOperatingPoint {
        let l = 600e-12;
        QubitOperatingPoint {
            f10_hz: 1e9,
            t1_s: t1,
            p_stray: p,
            matrix_element_wb: l * 0.5e-6,
            l_h: l,
        }
    }

    #[test]
    fn extraction_arithmetic() {
        let s = spectra_from_relaxation(&op(1e-6, 0.1)).unwrap();
        // ħ²/(T1 I_p²) in Wb²/Hz.
        let wb2 = HBAR * HBAR / (1e-6 * 0.25e-12);
        assert!((wb2 - 4.449e-50).abs() / 4.449e-50 < 1e-3);
        assert!((s.s_plus * PHI0 * PHI0 / wb2 - 1.0).abs() < 1e-12);
        assert!((s.s_plus - 1.040e-20).abs() / 1.04e-20 < 1e-3);
    }

    #[test]
    fn limits_of_p_stray() {
        let s = spectra_from_relaxation(&op(1e-6, 0.5)).unwrap();
        assert_eq!(s.s_minus, 0.0);
        let s = spectra_from_relaxation(&op(1e-6, 0.0)).unwrap();
        assert_eq!(s.s_minus, s.s_plus);
        assert!(spectra_from_relaxation(&op(1e-6, 0.6)).is_err());
    }

    #[test]
    fn t_eff_values() {
        let t = effective_temperature(1e9, 0.168).unwrap();
        assert!((t - 0.030).abs() < 1e-4, "{t}");
        let t2 = effective_temperature(2e9, 0.168).unwrap();
        assert!((t2 / t - 2.0).abs() < 1e-12);
        assert!(matches!(effective_temperature(1e9, 0.0), Err(Error::OutOfRange(_))));
        assert!(matches!(effective_temperature(1e9, 0.5), Err(Error::OutOfRange(_))));
        assert!(effective_temperature(1e9, 1e-6).unwrap() < 0.005);
    }

    #[test]
    fn round_trip_rates() {
        let pt = op(12e-6, 0.21);
        let s = spectra_from_relaxation(&pt).unwrap();
        let r = rates_from_spectra(&s, pt.matrix_element_wb, pt.l_h);
        assert!((r.t1() / pt.t1_s - 1.0).abs() < 1e-12);
        assert!((r.p_stray() / pt.p_stray - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transforms_invert() {
        for tr in [Transform::Log, Transform::Logit(1.0, 5.0)] {
            for &v in &[1.5, 2.0, 3.7] {
                assert!((tr.to_nat(tr.to_t(v)) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_points_rejected() {
        let p = FitPoint {
            f_hz: 1e9,
            s_plus: 1e-20,
            s_minus: 5e-21,
            sigma_ln_s_plus: 0.1,
            sigma_ratio: 0.02,
        };
        let init = Family::Phenomenological.model(&[1e-12, 1.0, 0.03, 1e-40, 3.0, 0.03]);
        let r = fit_model(&vec![p; 10], Family::Phenomenological, &init, &[false; 6], &FitOptions::default());
        assert!(r.is_err());
    }
}
