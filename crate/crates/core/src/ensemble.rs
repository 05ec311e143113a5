//! Seeded Monte Carlo ensembles over random-boundary realizations.
//!
//! Realization `i` draws its boundary errors from a ChaCha8 stream seeded
//! with [`child_seed`]`(master, i)`, so any member can be regenerated alone.
//! Realizations run in parallel; reduction happens afterwards in index
//! order, which keeps results bit-identical for any thread count.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::ProcessConfig;
use crate::dispersion::SellmeierModel;
use crate::error::{param, Error, Result};
use crate::grating::{build_ideal, perturb, DomainStructure, GratingSpec};
use crate::spectrum::{
    digest, peak_metrics, sig9, write_meta, Method, PeakMetrics, PhasePlan, Spectrum, SpectrumMeta, WavelengthGrid,
};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `index`: SplitMix64 applied to
/// `mix64(master) + (index + 1) * 0x9e3779b97f4a7c15`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub grating: GratingSpec,
    pub process: ProcessConfig,
    pub grid: WavelengthGrid,
    pub realizations: usize,
    pub master_seed: u64,
    /// Index of the first realization; lets disjoint runs be merged.
    #[serde(default)]
    pub first_index: u64,
    /// Side peaks below this fraction of the main peak are not reported.
    #[serde(default = "default_side_floor")]
    pub side_floor: f64,
}

fn default_side_floor() -> f64 {
    0.05
}

impl EnsembleConfig {
    pub fn new(
        grating: GratingSpec,
        process: ProcessConfig,
        grid: WavelengthGrid,
        realizations: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            grating,
            process,
            grid,
            realizations,
            master_seed,
            first_index: 0,
            side_floor: default_side_floor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grating.validate()?;
        self.process.validate()?;
        if self.realizations < 1 {
            return Err(param("an ensemble needs at least one realization"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.realizations as u64)
            .map(|i| child_seed(self.master_seed, self.first_index + i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStatistics {
    pub grid: WavelengthGrid,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub sem: Vec<f64>,
    /// Peak metrics of each realization, `None` for a flat realization.
    pub peaks: Vec<Option<PeakMetrics>>,
    pub seeds: Vec<u64>,
    pub meta: SpectrumMeta,
}

impl EnsembleStatistics {
    pub fn realizations(&self) -> usize {
        self.seeds.len()
    }

    pub fn mean_spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            values: self.mean.clone(),
            meta: self.meta.clone(),
        }
    }

    /// `wavelength_nm,mean_S,std_S,sem_S`, 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write_meta(&mut out, &self.meta)?;
        writeln!(out, "# realizations={}", self.realizations())?;
        writeln!(out, "wavelength_nm,mean_S,std_S,sem_S")?;
        for i in 0..self.grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                sig9(self.grid.points()[i] * 1e3),
                sig9(self.mean[i]),
                sig9(self.std[i]),
                sig9(self.sem[i])
            )?;
        }
        Ok(())
    }

    /// Sidecar listing every child seed, one `index,seed` row each.
    pub fn write_seeds<W: Write>(&self, first_index: u64, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# child_seed(master, i) = splitmix64(splitmix64(master) + (i + 1) * 0x9e3779b97f4a7c15)"
        )?;
        writeln!(out, "index,seed")?;
        for (i, s) in self.seeds.iter().enumerate() {
            writeln!(out, "{},{}", first_index + i as u64, s)?;
        }
        Ok(())
    }
}

fn realization_structure(ideal: &DomainStructure, sigma: f64, seed: u64) -> Result<DomainStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(perturb(ideal, sigma, &mut rng)?.structure)
}

fn realization_meta(cfg: &EnsembleConfig) -> SpectrumMeta {
    SpectrumMeta {
        method: Some(Method::Numeric),
        process_digest: digest(&cfg.process),
        grating_digest: digest(&cfg.grating),
        ..Default::default()
    }
}

/// Per-realization spectra for the configured index range, in index order.
pub fn realization_values(model: &SellmeierModel, cfg: &EnsembleConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let ideal = build_ideal(&cfg.grating)?;
    let plan = PhasePlan::new(model, &cfg.grid, &cfg.process)?;
    cfg.seeds()
        .into_par_iter()
        .map(|seed| {
            let s = realization_structure(&ideal, cfg.grating.sigma_um, seed)?;
            Ok(plan.numeric_values(&s, cfg.process.coupling))
        })
        .collect()
}

/// The `index`-th member of [`run_ensemble`] on its own.
pub fn single_realization(model: &SellmeierModel, cfg: &EnsembleConfig, index: usize) -> Result<Spectrum> {
    cfg.validate()?;
    if index >= cfg.realizations {
        return Err(param(format!(
            "realization index {index} out of range for an ensemble of {}",
            cfg.realizations
        )));
    }
    let seed = child_seed(cfg.master_seed, cfg.first_index + index as u64);
    let ideal = build_ideal(&cfg.grating)?;
    let s = realization_structure(&ideal, cfg.grating.sigma_um, seed)?;
    let plan = PhasePlan::new(model, &cfg.grid, &cfg.process)?;
    let mut meta = realization_meta(cfg);
    meta.seed = Some(seed);
    Spectrum::new(cfg.grid.clone(), plan.numeric_values(&s, cfg.process.coupling), meta)
}

/// Pointwise mean, sample standard deviation and standard error.
pub fn reduce(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = samples.len();
    let width = samples
        .first()
        .map(Vec::len)
        .ok_or_else(|| param("no samples to reduce"))?;
    if samples.iter().any(|s| s.len() != width) {
        return Err(param("samples have different lengths"));
    }
    let mut mean = vec![0.0; width];
    let mut std = vec![0.0; width];
    let mut sem = vec![0.0; width];
    for p in 0..width {
        let mut sum = CompensatedSum::default();
        samples.iter().for_each(|s| sum.add(s[p]));
        let m = sum.value() / n as f64;
        mean[p] = m;
        if n > 1 {
            let mut sq = CompensatedSum::default();
            samples.iter().for_each(|s| sq.add((s[p] - m) * (s[p] - m)));
            std[p] = (sq.value() / (n - 1) as f64).sqrt();
            sem[p] = std[p] / (n as f64).sqrt();
        }
    }
    Ok((mean, std, sem))
}

pub fn run_ensemble(model: &SellmeierModel, cfg: &EnsembleConfig) -> Result<EnsembleStatistics> {
    let values = realization_values(model, cfg)?;
    let (mean, std, sem) = reduce(&values)?;
    let peaks = values
        .iter()
        .map(|v| {
            let sp = Spectrum {
                grid: cfg.grid.clone(),
                values: v.clone(),
                meta: SpectrumMeta::default(),
            };
            match peak_metrics(&sp, cfg.side_floor) {
                Ok(m) => Ok(Some(m)),
                Err(Error::NoPeak(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meta = realization_meta(cfg);
    meta.extra.insert("master_seed".into(), cfg.master_seed.to_string());
    Ok(EnsembleStatistics {
        grid: cfg.grid.clone(),
        mean,
        std,
        sem,
        peaks,
        seeds: cfg.seeds(),
        meta,
    })
}

/// Disorder-induced changes of the mean spectrum relative to an unperturbed reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionSummary {
    pub qpm_peak_wavelength_um: f64,
    pub mean_qpm_peak: f64,
    pub reference_qpm_peak: f64,
    /// Mean QPM peak over reference QPM peak.
    pub peak_ratio: f64,
    pub peak_ratio_sem: f64,
    pub nbpm_peak_wavelength_um: Option<f64>,
    /// NBPM peak over QPM peak of the mean spectrum.
    pub nbpm_to_qpm: Option<f64>,
    pub nbpm_to_qpm_sem: Option<f64>,
}

impl ReductionSummary {
    pub fn reduction(&self) -> f64 {
        1.0 - self.peak_ratio
    }
}

/// Compares peaks of the ensemble mean with the reference inside the given
/// wavelength windows (um).
pub fn reduction_summary(
    stats: &EnsembleStatistics,
    reference: &Spectrum,
    qpm_window: (f64, f64),
    nbpm_window: Option<(f64, f64)>,
) -> Result<ReductionSummary> {
    if stats.grid != reference.grid {
        return Err(Error::GridMismatch(format!(
            "ensemble grid has {} points, reference has {}",
            stats.grid.len(),
            reference.grid.len()
        )));
    }
    let mean = stats.mean_spectrum();
    let no_peak = |what: &str, w: (f64, f64)| Error::NoPeak(format!("no {what} samples in [{}, {}] um", w.0, w.1));
    let (qi, ql, qv) = mean
        .peak_in(qpm_window.0, qpm_window.1)
        .ok_or_else(|| no_peak("QPM", qpm_window))?;
    let (_, _, rv) = reference
        .peak_in(qpm_window.0, qpm_window.1)
        .ok_or_else(|| no_peak("QPM", qpm_window))?;
    if !(rv > 0.0) {
        return Err(Error::Undefined("reference QPM peak".into()));
    }
    let (mut nl, mut ratio, mut ratio_sem) = (None, None, None);
    if let Some(w) = nbpm_window {
        let (ni, l, nv) = mean.peak_in(w.0, w.1).ok_or_else(|| no_peak("NBPM", w))?;
        if !(qv > 0.0) {
            return Err(Error::Undefined("mean QPM peak".into()));
        }
        let r = nv / qv;
        let rel_n = if nv > 0.0 { stats.sem[ni] / nv } else { 0.0 };
        let rel_q = stats.sem[qi] / qv;
        nl = Some(l);
        ratio = Some(r);
        ratio_sem = Some(r * (rel_n * rel_n + rel_q * rel_q).sqrt());
    }
    Ok(ReductionSummary {
        qpm_peak_wavelength_um: ql,
        mean_qpm_peak: qv,
        reference_qpm_peak: rv,
        peak_ratio: qv / rv,
        peak_ratio_sem: stats.sem[qi] / rv,
        nbpm_peak_wavelength_um: nl,
        nbpm_to_qpm: ratio,
        nbpm_to_qpm_sem: ratio_sem,
    })
}
