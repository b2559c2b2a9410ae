use std::path::{Path, PathBuf};

use fluxnoise::detector::{simulate_shots_task, ShotSequence};
use fluxnoise::io::{read_shots, read_timeseries_csv, write_shots, write_spectrum_csv, write_timeseries_csv};
use fluxnoise::models::SpectralModel;
use fluxnoise::rng::derive_seed;
use fluxnoise::spectra::{periodogram, shots_to_flux_psd_raw, InterleavedAccumulator, SpectrumEstimate};
use fluxnoise::synth::{generate_power_law_realization, synthesize, PowerLawSpec, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Command, Report};
use crate::config::resolve;
use crate::error::{CliError, CliResult};

/// Stream index of detector draws under a simulated run's base seed.
const DETECTOR_STREAM: u64 = 1 << 40;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSource {
    /// `S⁺ = A²/f^α` with `A` in Φ0/√Hz; flat below `f_min_hz`.
    PowerLaw {
        amplitude_phi0_per_rthz_at_1hz: f64,
        alpha: f64,
        #[serde(default)]
        f_min_hz: f64,
    },
    Model(SpectralModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub dt_s: f64,
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default = "one")]
    pub oversample_factor: usize,
    pub seed: u64,
    pub spectrum: SpectrumSource,
}

impl SynthConfig {
    fn realization(&self, k: u64) -> CliResult<TimeSeries> {
        Ok(match &self.spectrum {
            SpectrumSource::PowerLaw {
                amplitude_phi0_per_rthz_at_1hz,
                alpha,
                f_min_hz,
            } => {
                let spec = PowerLawSpec {
                    amplitude_at_1hz: *amplitude_phi0_per_rthz_at_1hz,
                    alpha: *alpha,
                    f_min_hz: *f_min_hz,
                    seed: self.seed,
                    oversample_factor: self.oversample_factor,
                };
                generate_power_law_realization(&spec, self.n_samples, self.dt_s, k)?
            }
            SpectrumSource::Model(m) => {
                m.validate()?;
                synthesize(|f| m.s_plus(f), self.n_samples, self.dt_s, self.oversample_factor, self.seed, k)?
            }
        })
    }

    fn check(&self) -> CliResult<()> {
        if self.realizations == 0 {
            return Err(CliError::config("`realizations` must be >= 1"));
        }
        Ok(())
    }
}

impl Command for SynthConfig {
    const NAME: &'static str = "synth";

    fn set_seed(&mut self, seed: u64) -> CliResult<()> {
        self.seed = seed;
        Ok(())
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        self.check()?;
        let names: Vec<String> = (0..self.realizations).map(|k| format!("flux_{k:03}.csv")).collect();
        names
            .par_iter()
            .enumerate()
            .map(|(k, name)| {
                let ts = self.realization(k as u64)?;
                write_timeseries_csv(&out.join(name), &ts)?;
                Ok(())
            })
            .collect::<CliResult<Vec<()>>>()?;
        Ok(Report {
            summary: vec![format!("wrote {} flux records of {} samples", names.len(), self.n_samples)],
            outputs: names,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotsConfig {
    /// Flux records (`t_s,phi_phi0` CSV); record `k` uses detector task `k`.
    pub inputs: Vec<PathBuf>,
    pub sensitivity_per_phi0: f64,
    pub seed: u64,
}

impl Command for ShotsConfig {
    const NAME: &'static str = "shots";

    fn resolve_paths(&mut self, base: &Path) {
        self.inputs.iter_mut().for_each(|p| resolve(base, p));
    }

    fn set_seed(&mut self, seed: u64) -> CliResult<()> {
        self.seed = seed;
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.inputs.clone()
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        if self.inputs.is_empty() {
            return Err(CliError::config("`inputs` is empty"));
        }
        let mut rep = Report::default();
        for (k, p) in self.inputs.iter().enumerate() {
            let ts = read_timeseries_csv(p)?;
            let run = simulate_shots_task(&ts, self.sensitivity_per_phi0, self.seed, k as u64)?;
            if run.clamped_fraction > 0.0 {
                eprintln!(
                    "warning: {}: {:.3e} of shots had probability outside [0, 1] and were clamped",
                    p.display(),
                    run.clamped_fraction
                );
            }
            let name = format!("shots_{k:03}.bin");
            write_shots(&out.join(&name), &run.shots, self.seed)?;
            rep.outputs.push(name.clone());
            rep.outputs.push(format!("{name}.json"));
        }
        rep.summary.push(format!("wrote {} shot records", self.inputs.len()));
        Ok(rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Interleaved even/odd cross-spectrum of shot records.
    Interleaved,
    /// Periodogram of flux records.
    Periodogram,
    /// Shot periodogram with the white floor subtracted.
    ShotPeriodogram,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimateInput {
    ShotFiles(Vec<PathBuf>),
    FluxFiles(Vec<PathBuf>),
    /// Synthesized flux read out by the detector; `synth.realizations` datasets.
    Simulate { synth: SynthConfig, sensitivity_per_phi0: f64 },
}

fn ten() -> Option<usize> {
    Some(10)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub method: Method,
    pub input: EstimateInput,
    /// `null` for the unbinned grid.
    #[serde(default = "ten")]
    pub bins_per_decade: Option<usize>,
}

impl EstimateConfig {
    fn count(&self) -> usize {
        match &self.input {
            EstimateInput::ShotFiles(v) | EstimateInput::FluxFiles(v) => v.len(),
            EstimateInput::Simulate { synth, .. } => synth.realizations,
        }
    }

    fn flux(&self, k: usize) -> CliResult<TimeSeries> {
        match &self.input {
            EstimateInput::FluxFiles(v) => Ok(read_timeseries_csv(&v[k])?),
            EstimateInput::Simulate { synth, .. } => synth.realization(k as u64),
            EstimateInput::ShotFiles(_) => Err(CliError::config("method `periodogram` needs flux_files or simulate input")),
        }
    }

    fn shots(&self, k: usize) -> CliResult<ShotSequence> {
        match &self.input {
            EstimateInput::ShotFiles(v) => Ok(read_shots(&v[k])?.0),
            EstimateInput::Simulate {
                synth,
                sensitivity_per_phi0,
            } => {
                let ts = synth.realization(k as u64)?;
                let det = derive_seed(synth.seed, DETECTOR_STREAM);
                Ok(simulate_shots_task(&ts, *sensitivity_per_phi0, det, k as u64)?.shots)
            }
            EstimateInput::FluxFiles(_) => Err(CliError::config(
                "methods `interleaved` and `shot_periodogram` need shot_files or simulate input",
            )),
        }
    }

    /// Datasets are produced in parallel batches and consumed in index order.
    fn for_each_batch<T: Send>(
        &self,
        make: impl Fn(usize) -> CliResult<T> + Sync,
        mut eat: impl FnMut(T) -> CliResult<()>,
    ) -> CliResult<()> {
        let batch = rayon::current_num_threads().max(1);
        let n = self.count();
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            let items: Vec<T> = (start..end).into_par_iter().map(&make).collect::<CliResult<_>>()?;
            for it in items {
                eat(it)?;
            }
            start = end;
        }
        Ok(())
    }

    fn mean_of(&self, make: impl Fn(usize) -> CliResult<SpectrumEstimate> + Sync) -> CliResult<SpectrumEstimate> {
        let mut acc: Option<SpectrumEstimate> = None;
        let mut k = 0usize;
        self.for_each_batch(make, |e| {
            match acc.as_mut() {
                None => acc = Some(e),
                Some(a) => {
                    if a.freqs.len() != e.freqs.len() || a.meta.dt_s != e.meta.dt_s {
                        return Err(CliError::config(format!(
                            "dataset {k} differs in length or sampling interval from dataset 0"
                        )));
                    }
                    for (x, y) in a.s_plus.iter_mut().zip(&e.s_plus) {
                        *x += y;
                    }
                }
            }
            k += 1;
            Ok(())
        })?;
        let mut a = acc.ok_or_else(|| CliError::config("no datasets"))?;
        let inv = 1.0 / k as f64;
        a.s_plus.iter_mut().for_each(|v| *v *= inv);
        a.meta.k_datasets = k;
        Ok(a)
    }
}

impl Command for EstimateConfig {
    const NAME: &'static str = "estimate";

    fn resolve_paths(&mut self, base: &Path) {
        match &mut self.input {
            EstimateInput::ShotFiles(v) | EstimateInput::FluxFiles(v) => v.iter_mut().for_each(|p| resolve(base, p)),
            EstimateInput::Simulate { .. } => {}
        }
    }

    fn set_seed(&mut self, seed: u64) -> CliResult<()> {
        match &mut self.input {
            EstimateInput::Simulate { synth, .. } => {
                synth.seed = seed;
                Ok(())
            }
            _ => Err(CliError::config("`--seed` applies to estimate only with simulate input")),
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        match &self.input {
            EstimateInput::ShotFiles(v) | EstimateInput::FluxFiles(v) => v.clone(),
            EstimateInput::Simulate { .. } => Vec::new(),
        }
    }

    fn run(&self, out: &Path) -> CliResult<Report> {
        if self.count() == 0 {
            return Err(CliError::config("no datasets in `input`"));
        }
        if let EstimateInput::Simulate { synth, .. } = &self.input {
            synth.check()?;
        }
        if self.bins_per_decade == Some(0) {
            return Err(CliError::config("`bins_per_decade` must be >= 1 or null"));
        }
        let est = match self.method {
            Method::Interleaved => {
                let mut acc: Option<InterleavedAccumulator> = None;
                self.for_each_batch(
                    |k| self.shots(k),
                    |s| {
                        if acc.is_none() {
                            acc = Some(InterleavedAccumulator::new(s.len(), s.dt, s.sensitivity)?);
                        }
                        acc.as_mut().unwrap().add(&s)?;
                        Ok(())
                    },
                )?;
                acc.unwrap().finish(self.bins_per_decade)?
            }
            Method::Periodogram => {
                let m = self.mean_of(|k| Ok(periodogram(&self.flux(k)?)?))?;
                self.bin(m)?
            }
            Method::ShotPeriodogram => {
                let m = self.mean_of(|k| Ok(shots_to_flux_psd_raw(&self.shots(k)?)?))?;
                self.bin(m)?
            }
        };
        let name = "spectrum.csv".to_string();
        write_spectrum_csv(&out.join(&name), &est)?;
        Ok(Report {
            summary: vec![format!(
                "{} points from {} datasets of {} samples",
                est.freqs.len(),
                est.meta.k_datasets,
                est.meta.n_samples
            )],
            outputs: vec![name],
            ..Default::default()
        })
    }
}

impl EstimateConfig {
    fn bin(&self, e: SpectrumEstimate) -> CliResult<SpectrumEstimate> {
        Ok(match self.bins_per_decade {
            Some(b) => e.log_binned(b)?,
            None => e,
        })
    }
}
