//! Gaussian noise with a prescribed single-sided spectrum.
//!
//! Coefficients `X_k` on the grid `f_k = k/(L·dt)` are complex Gaussian with
//! `E|X_k|² = S⁺(f_k)·L/(2·dt)`, the DC bin is zero and the series is
//! `x_n = (1/L) Σ X_k e^{2πikn/L}`. With `oversample = m` the record is built
//! at `dt/m` and every `m`-th sample is kept, with no anti-alias filter.
//!
//! Normals are drawn in order of increasing `k`, two per bin, so the bins an
//! oversampled and a plain run share receive identical draws.

use realfft::num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_range, invalid, Result};
use crate::models::SpectralModel;
use crate::rng::task_rng;

/// Uniformly sampled flux record in Φ0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    /// Sampling interval, s.
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", format!("need at least 2 samples, got {}", samples.len())));
        }
        check_positive("dt", dt)?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid("samples", format!("sample {i} is not finite")));
        }
        Ok(TimeSeries { samples, dt })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Target `S⁺(f) = amplitude²/f^α` for synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSpec {
    /// Φ0/√Hz at 1 Hz.
    pub amplitude_at_1hz: f64,
    pub alpha: f64,
    /// Bins below this frequency use `S⁺(f_min)`, Hz.
    pub f_min_hz: f64,
    pub seed: u64,
    pub oversample_factor: usize,
}

impl PowerLawSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("amplitude_at_1hz", self.amplitude_at_1hz, 0.0, f64::MAX)?;
        check_range("alpha", self.alpha, 0.0, 2.0)?;
        check_range("f_min_hz", self.f_min_hz, 0.0, f64::MAX)?;
        if self.oversample_factor < 1 {
            return Err(invalid("oversample_factor", "must be >= 1"));
        }
        Ok(())
    }
}

/// Core synthesizer; `s_plus` maps a grid frequency in Hz to `S⁺`.
///
/// Draws come from task `k` of `seed`.
pub fn synthesize<F>(s_plus: F, n: usize, dt: f64, oversample: usize, seed: u64, task: u64) -> Result<TimeSeries>
where
    F: Fn(f64) -> Result<f64>,
{
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    check_positive("dt", dt)?;
    if oversample < 1 {
        return Err(invalid("oversample_factor", "must be >= 1"));
    }
    let len = n * oversample;
    let dts = dt / oversample as f64;
    let half = len / 2;
    let df = 1.0 / (len as f64 * dts);
    let mut rng = task_rng(seed, task);
    let mut spec = vec![Complex64::new(0.0, 0.0); half + 1];
    let base = len as f64 / (2.0 * dts);
    for (k, c) in spec.iter_mut().enumerate().skip(1) {
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        let s = s_plus(k as f64 * df)?;
        if !(s.is_finite() && s >= 0.0) {
            return Err(invalid("spectrum", format!("S+ = {s} at f = {} Hz", k as f64 * df)));
        }
        let amp = (s * base).sqrt();
        *c = if len % 2 == 0 && k == half {
            Complex64::new(amp * g1, 0.0)
        } else {
            Complex64::new(amp * g1, amp * g2) * std::f64::consts::FRAC_1_SQRT_2
        };
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let c2r = planner.plan_fft_inverse(len);
    let mut out = c2r.make_output_vec();
    c2r.process(&mut spec, &mut out)
        .map_err(|e| invalid("fft", e.to_string()))?;
    let scale = 1.0 / len as f64;
    let samples: Vec<f64> = out.iter().step_by(oversample).map(|v| v * scale).collect();
    debug_assert_eq!(samples.len(), n);
    TimeSeries::new(samples, dt)
}

/// Power-law noise; realization 0 of the ensemble seeded by `spec.seed`.
pub fn generate_power_law(spec: &PowerLawSpec, n: usize, dt: f64) -> Result<TimeSeries> {
    generate_power_law_realization(spec, n, dt, 0)
}

/// Realization `k` of the ensemble seeded by `spec.seed`.
pub fn generate_power_law_realization(spec: &PowerLawSpec, n: usize, dt: f64, k: u64) -> Result<TimeSeries> {
    spec.validate()?;
    let a2 = spec.amplitude_at_1hz * spec.amplitude_at_1hz;
    let alpha = spec.alpha;
    let fmin = spec.f_min_hz;
    synthesize(
        |f| Ok(a2 * f.max(fmin).powf(-alpha)),
        n,
        dt,
        spec.oversample_factor,
        spec.seed,
        k,
    )
}

/// `count` realizations generated in parallel; output order is by index.
pub fn generate_power_law_ensemble(spec: &PowerLawSpec, n: usize, dt: f64, count: usize) -> Result<Vec<TimeSeries>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| generate_power_law_realization(spec, n, dt, k))
        .collect()
}

/// Gaussian noise whose expected periodogram is the model's `S⁺`.
pub fn generate_from_model(model: &SpectralModel, n: usize, dt: f64, seed: u64) -> Result<TimeSeries> {
    generate_from_model_realization(model, n, dt, seed, 0)
}

/// Realization `k` of [`generate_from_model`].
pub fn generate_from_model_realization(model: &SpectralModel, n: usize, dt: f64, seed: u64, k: u64) -> Result<TimeSeries> {
    model.validate()?;
    synthesize(|f| model.s_plus(f), n, dt, 1, seed, k)
}
