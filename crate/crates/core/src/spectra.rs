//! Spectral estimators for flux records and single-shot sequences.
//!
//! Single-sided PSDs use `S⁺_k = (2·dt/N)|X_k|²` on `f_k = k/(N·dt)`,
//! `k = 1..N/2`, with a rectangular window.

use std::f64::consts::PI;

use rayon::prelude::*;
use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::detector::ShotSequence;
use crate::error::{check_positive, invalid, Result};
use crate::synth::TimeSeries;

/// Bookkeeping attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub n_samples: usize,
    pub dt_s: f64,
    pub bins_per_decade: Option<usize>,
    pub k_datasets: usize,
}

/// Single-sided PSD (Φ0²/Hz) with optional complex cross-spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    pub s_plus: Vec<f64>,
    pub csd: Option<Vec<Complex64>>,
    pub meta: SpectrumMeta,
}

impl SpectrumEstimate {
    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.s_plus.len() {
            return Err(invalid("s_plus", "length differs from freqs"));
        }
        if let Some(c) = &self.csd {
            if c.len() != self.freqs.len() {
                return Err(invalid("csd", "length differs from freqs"));
            }
        }
        if self.freqs.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(invalid("freqs", "entries must be finite and > 0"));
        }
        if self.freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("freqs", "must be strictly increasing"));
        }
        if self.s_plus.iter().any(|v| !v.is_finite()) {
            return Err(invalid("s_plus", "entries must be finite"));
        }
        Ok(())
    }

    /// Frequency spacing of the underlying DFT grid, Hz.
    pub fn grid_spacing(&self) -> f64 {
        1.0 / (self.meta.n_samples as f64 * self.meta.dt_s)
    }

    /// Logarithmically binned copy; see [`log_bin`].
    pub fn log_binned(&self, bins_per_decade: usize) -> Result<SpectrumEstimate> {
        let vals: Vec<Complex64> = match &self.csd {
            Some(c) => c.clone(),
            None => self.s_plus.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
        };
        let (f, c) = log_bin(&self.freqs, &vals, bins_per_decade)?;
        Ok(SpectrumEstimate {
            s_plus: c.iter().map(|z| z.re).collect(),
            csd: self.csd.as_ref().map(|_| c.clone()),
            freqs: f,
            meta: SpectrumMeta {
                bins_per_decade: Some(bins_per_decade),
                ..self.meta.clone()
            },
        })
    }
}

/// Forward real DFT `X_k = Σ x_n e^{-2πikn/N}` for `k = 0..N/2`.
pub fn rfft(x: &[f64]) -> Vec<Complex64> {
    let mut planner = RealFftPlanner::<f64>::new();
    let r2c = planner.plan_fft_forward(x.len());
    let mut input = x.to_vec();
    let mut out = r2c.make_output_vec();
    r2c.process(&mut input, &mut out).expect("buffer sizes match the plan");
    out
}

/// Single-sided periodogram of a flux record.
pub fn periodogram(x: &TimeSeries) -> Result<SpectrumEstimate> {
    let n = x.samples.len();
    if n < 2 {
        return Err(invalid("x", "need at least 2 samples"));
    }
    Ok(periodogram_raw(&x.samples, x.dt, 1.0))
}

/// `scale·(2dt/N)|X_k|²` for `k = 1..N/2`.
fn periodogram_raw(x: &[f64], dt: f64, scale: f64) -> SpectrumEstimate {
    let n = x.len();
    let spec = rfft(x);
    let c = scale * 2.0 * dt / n as f64;
    let half = n / 2;
    let freqs = (1..=half).map(|k| k as f64 / (n as f64 * dt)).collect();
    let s_plus = (1..=half).map(|k| c * spec[k].norm_sqr()).collect();
    SpectrumEstimate {
        freqs,
        s_plus,
        csd: None,
        meta: SpectrumMeta {
            n_samples: n,
            dt_s: dt,
            bins_per_decade: None,
            k_datasets: 1,
        },
    }
}

/// Expected shot-noise floor `dt/(2·sensitivity²)` in Φ0²/Hz.
pub fn white_floor_level(dt: f64, sensitivity: f64) -> Result<f64> {
    check_positive("dt", dt)?;
    check_positive("sensitivity", sensitivity)?;
    Ok(dt / (2.0 * sensitivity * sensitivity))
}

/// Shot periodogram in flux units, `(2dt/N)|x̃_k|²/(4s²)`, without floor removal.
pub fn shots_to_flux_psd_unsubtracted(shots: &ShotSequence) -> Result<SpectrumEstimate> {
    if shots.len() < 2 {
        return Err(invalid("shots", "need at least 2 shots"));
    }
    let s = shots.sensitivity;
    Ok(periodogram_raw(&shots.as_f64(), shots.dt, 1.0 / (4.0 * s * s)))
}

/// Shot periodogram in flux units with the analytic floor subtracted.
///
/// Values may be negative; they are kept so ensemble averages stay unbiased.
pub fn shots_to_flux_psd_raw(shots: &ShotSequence) -> Result<SpectrumEstimate> {
    let mut est = shots_to_flux_psd_unsubtracted(shots)?;
    let floor = white_floor_level(shots.dt, shots.sensitivity)?;
    for v in &mut est.s_plus {
        *v -= floor;
    }
    Ok(est)
}

/// Geometric log binning anchored at `freqs[0]`.
///
/// Bin `j` holds grid points with `f_0·10^{j/b} ≤ f < f_0·10^{(j+1)/b}`.
/// Values are averaged as complex numbers; the bin frequency is the geometric
/// mean of its members. Empty bins are dropped.
pub fn log_bin(freqs: &[f64], vals: &[Complex64], bins_per_decade: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if bins_per_decade == 0 {
        return Err(invalid("bins_per_decade", "must be >= 1"));
    }
    if freqs.len() != vals.len() {
        return Err(invalid("vals", "length differs from freqs"));
    }
    let Some(&f0) = freqs.first() else {
        return Ok((vec![], vec![]));
    };
    let b = bins_per_decade as f64;
    let mut out_f = Vec::new();
    let mut out_v = Vec::new();
    let mut cur: Option<i64> = None;
    let (mut sum, mut lsum, mut cnt) = (Complex64::new(0.0, 0.0), 0.0, 0usize);
    for (&f, &v) in freqs.iter().zip(vals) {
        // Small guard so grid points that sit on an edge land in the upper bin.
        let j = ((f / f0).log10() * b + 1e-9).floor() as i64;
        if cur != Some(j) {
            if cnt > 0 {
                out_f.push((lsum / cnt as f64).exp());
                out_v.push(sum / cnt as f64);
            }
            cur = Some(j);
            sum = Complex64::new(0.0, 0.0);
            lsum = 0.0;
            cnt = 0;
        }
        sum += v;
        lsum += f.ln();
        cnt += 1;
    }
    if cnt > 0 {
        out_f.push((lsum / cnt as f64).exp());
        out_v.push(sum / cnt as f64);
    }
    Ok((out_f, out_v))
}

/// Phase-corrected cross-spectrum of even and odd sub-sequences, in DFT
/// units: `X'_k conj(X''_k) e^{iπk/M}` for `k = 1..M/2`, `M = N/2`.
pub fn interleaved_csd_raw(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < 4 || n % 2 != 0 {
        return Err(invalid("dataset", format!("length must be even and >= 4, got {n}")));
    }
    let m = n / 2;
    let even: Vec<f64> = x.iter().step_by(2).copied().collect();
    let odd: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
    let xe = rfft(&even);
    let xo = rfft(&odd);
    Ok((1..=m / 2)
        .map(|k| {
            let ph = Complex64::from_polar(1.0, PI * k as f64 / m as f64);
            xe[k] * xo[k].conj() * ph
        })
        .collect())
}

/// Streaming coherent average of interleaved cross-spectra.
#[derive(Debug, Clone)]
pub struct InterleavedAccumulator {
    n: usize,
    dt: f64,
    sensitivity: f64,
    sum: Vec<Complex64>,
    count: usize,
}

impl InterleavedAccumulator {
    pub fn new(n: usize, dt: f64, sensitivity: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid("dataset", format!("length must be even and >= 4, got {n}")));
        }
        check_positive("dt", dt)?;
        check_positive("sensitivity", sensitivity)?;
        Ok(InterleavedAccumulator {
            n,
            dt,
            sensitivity,
            sum: vec![Complex64::new(0.0, 0.0); n / 4],
            count: 0,
        })
    }

    fn check(&self, s: &ShotSequence) -> Result<()> {
        if s.len() != self.n {
            return Err(invalid("datasets", format!("length {} differs from {}", s.len(), self.n)));
        }
        if s.dt != self.dt {
            return Err(invalid("datasets", format!("dt {} differs from {}", s.dt, self.dt)));
        }
        if s.sensitivity != self.sensitivity {
            return Err(invalid(
                "datasets",
                format!("sensitivity {} differs from {}", s.sensitivity, self.sensitivity),
            ));
        }
        Ok(())
    }

    /// Adds one dataset.
    pub fn add(&mut self, shots: &ShotSequence) -> Result<()> {
        self.check(shots)?;
        let c = interleaved_csd_raw(&shots.as_f64())?;
        self.add_raw(&c);
        Ok(())
    }

    fn add_raw(&mut self, c: &[Complex64]) {
        for (a, b) in self.sum.iter_mut().zip(c) {
            *a += *b;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Coherent mean, optional log binning, then conversion to Φ0²/Hz.
    pub fn finish(&self, bins_per_decade: Option<usize>) -> Result<SpectrumEstimate> {
        if self.count == 0 {
            return Err(invalid("datasets", "no datasets were added"));
        }
        let n = self.n as f64;
        let freqs: Vec<f64> = (1..=self.sum.len()).map(|k| k as f64 / (n * self.dt)).collect();
        let k = self.count as f64;
        let mean: Vec<Complex64> = self.sum.iter().map(|z| z / k).collect();
        let (freqs, vals) = match bins_per_decade {
            Some(b) => log_bin(&freqs, &mean, b)?,
            None => (freqs, mean),
        };
        // Sub-sequences have M = N/2 samples at 2dt: scale (2·T_sub/M²)/(4s²).
        let m = n / 2.0;
        let scale = 2.0 * (m * 2.0 * self.dt) / (m * m) / (4.0 * self.sensitivity * self.sensitivity);
        let csd: Vec<Complex64> = vals.iter().map(|z| z * scale).collect();
        Ok(SpectrumEstimate {
            freqs,
            s_plus: csd.iter().map(|z| z.re).collect(),
            csd: Some(csd),
            meta: SpectrumMeta {
                n_samples: self.n,
                dt_s: self.dt,
                bins_per_decade,
                k_datasets: self.count,
            },
        })
    }
}

/// Interleaved, phase-corrected, coherently averaged and log-binned CSD.
///
/// The real part is the flux PSD estimate; no floor is subtracted.
pub fn interleaved_pipeline(datasets: &[ShotSequence], bins_per_decade: usize) -> Result<SpectrumEstimate> {
    let first = datasets.first().ok_or_else(|| invalid("datasets", "empty list"))?;
    let mut acc = InterleavedAccumulator::new(first.len(), first.dt, first.sensitivity)?;
    for d in datasets {
        acc.check(d)?;
    }
    // Per-dataset transforms in parallel; summation in dataset order.
    let parts: Vec<Vec<Complex64>> = datasets
        .par_iter()
        .map(|d| interleaved_csd_raw(&d.as_f64()))
        .collect::<Result<_>>()?;
    for c in &parts {
        acc.add_raw(c);
    }
    acc.finish(Some(bins_per_decade))
}

/// Block-averaged detector probability mapped back to flux.
///
/// `p_j` is the fraction of `+1` in block `j`; flux is `(p_j - 1/2)/s` at
/// interval `block·dt`. A trailing partial block is dropped.
pub fn block_average_lowfreq(shots: &ShotSequence, block: usize) -> Result<TimeSeries> {
    let n = shots.len();
    if block < 1 {
        return Err(invalid("block", "must be >= 1"));
    }
    if block > n {
        return Err(invalid("block", format!("block {block} exceeds record length {n}")));
    }
    if n / block < 2 {
        return Err(invalid("block", "fewer than two complete blocks"));
    }
    let s = shots.sensitivity;
    let vals: Vec<f64> = shots
        .shots
        .chunks_exact(block)
        .map(|c| {
            let ups = c.iter().filter(|&&v| v == 1).count();
            let p = ups as f64 / block as f64;
            (p - 0.5) / s
        })
        .collect();
    TimeSeries::new(vals, shots.dt * block as f64)
}

/// Joins a low-frequency and a high-frequency estimate at `f_splice` (Hz).
pub fn splice(low: &SpectrumEstimate, high: &SpectrumEstimate, f_splice: f64) -> Result<SpectrumEstimate> {
    check_positive("f_splice", f_splice)?;
    let mut freqs = Vec::new();
    let mut s_plus = Vec::new();
    for (f, s) in low.freqs.iter().zip(&low.s_plus) {
        if *f < f_splice {
            freqs.push(*f);
            s_plus.push(*s);
        }
    }
    for (f, s) in high.freqs.iter().zip(&high.s_plus) {
        if *f >= f_splice {
            freqs.push(*f);
            s_plus.push(*s);
        }
    }
    let out = SpectrumEstimate {
        freqs,
        s_plus,
        csd: None,
        meta: high.meta.clone(),
    };
    out.validate()?;
    Ok(out)
}

/// Biased sample autocovariance `R_j = (1/N) Σ x_n x_{n+j}` for `j ≤ max_lag`.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let lags = max_lag.min(n.saturating_sub(1));
    (0..=lags)
        .map(|j| x[..n - j].iter().zip(&x[j..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// `S⁺(f) = 2dt[R_0 + 2 Σ_j R_j cos(2πf j dt)]` from autocovariances.
pub fn psd_from_autocovariance(r: &[f64], dt: f64, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f * dt;
            let tail: f64 = r.iter().enumerate().skip(1).map(|(j, rj)| rj * (w * j as f64).cos()).sum();
            2.0 * dt * (r[0] + 2.0 * tail)
        })
        .collect()
}

/// Least-squares slope and intercept of `ln y` on `ln x` over positive pairs.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
