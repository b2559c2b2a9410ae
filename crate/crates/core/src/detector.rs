//! Single-shot binary detector driven by an underlying flux record.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, invalid, Result};
use crate::rng::task_rng;
use crate::synth::TimeSeries;

/// A ±1 single-shot record.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSequence {
    pub shots: Vec<i8>,
    /// Shot interval, s.
    pub dt: f64,
    /// Slope `dP/dΦ` of the detector transfer curve, 1/Φ0.
    pub sensitivity: f64,
}

impl ShotSequence {
    pub fn new(shots: Vec<i8>, dt: f64, sensitivity: f64) -> Result<Self> {
        check_positive("dt", dt)?;
        check_positive("sensitivity", sensitivity)?;
        if let Some(i) = shots.iter().position(|s| *s != 1 && *s != -1) {
            return Err(invalid("shots", format!("entry {i} is {} (expected -1 or +1)", shots[i])));
        }
        Ok(ShotSequence { shots, dt, sensitivity })
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.shots.iter().map(|&s| s as f64).collect()
    }
}

/// Simulation output with the clamp diagnostic.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub shots: ShotSequence,
    /// Fraction of shots whose probability `1/2 + s·δΦ` left `[0, 1]`.
    pub clamped_fraction: f64,
}

/// Sidecar metadata stored next to a shot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotMeta {
    pub dt_s: f64,
    pub sensitivity_per_phi0: f64,
    pub seed: u64,
}

/// `P(+1) = clamp(1/2 + sensitivity·δΦ_n, 0, 1)`, drawn independently per shot.
pub fn simulate_shots(flux: &TimeSeries, sensitivity: f64, seed: u64) -> Result<DetectorRun> {
    simulate_shots_task(flux, sensitivity, seed, 0)
}

/// As [`simulate_shots`] with draws from task `task` of `seed`.
pub fn simulate_shots_task(flux: &TimeSeries, sensitivity: f64, seed: u64, task: u64) -> Result<DetectorRun> {
    if flux.samples.is_empty() {
        return Err(invalid("flux", "empty input"));
    }
    check_positive("sensitivity", sensitivity)?;
    let mut rng = task_rng(seed, task);
    let mut clamped = 0usize;
    let shots: Vec<i8> = flux
        .samples
        .iter()
        .map(|&phi| {
            let p = 0.5 + sensitivity * phi;
            if !(0.0..=1.0).contains(&p) {
                clamped += 1;
            }
            let p = p.clamp(0.0, 1.0);
            let u: f64 = rng.gen();
            if u < p {
                1
            } else {
                -1
            }
        })
        .collect();
    let n = shots.len();
    Ok(DetectorRun {
        shots: ShotSequence {
            shots,
            dt: flux.dt,
            sensitivity,
        },
        clamped_fraction: clamped as f64 / n as f64,
    })
}
