//! Pinned parameter sets for the `reproduce` subcommand.

use std::fmt::Write as _;

use qpm_core::analysis::{find_nbpm, find_qpm, nbpm_curve};
use qpm_core::ensemble::{reduction_summary, single_realization, ReductionSummary};
use qpm_core::spectrum::peak_metrics;
use qpm_core::*;
use serde::Serialize;
use serde_json::json;
use std::result::Result;

use crate::CliError;

/// KTP crystal length used by every recipe, um.
pub const CRYSTAL_LENGTH_UM: f64 = 11000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1b,
    Fig1c,
    Fig1d,
    Fig5a,
    Fig5b,
    Fig5c,
    Fig5d,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1b => "fig1b",
            Figure::Fig1c => "fig1c",
            Figure::Fig1d => "fig1d",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
            Figure::Fig5c => "fig5c",
            Figure::Fig5d => "fig5d",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecipeOptions {
    pub realizations: usize,
    pub master_seed: u64,
}

impl Default for RecipeOptions {
    fn default() -> Self {
        Self {
            realizations: 200,
            master_seed: 0,
        }
    }
}

pub struct RecipeOutput {
    pub csv: String,
    pub summary: serde_json::Value,
}

fn process(pump_um: f64, sense: Sense) -> ProcessConfig {
    ProcessConfig::new(PhaseMismatchSpec::type_ii(pump_um, sense))
}

fn e(v: f64) -> String {
    format!("{v:.8e}")
}

/// Backward 532 nm process and the grating-II QPM grid.
pub fn fig1b_setup(model: &SellmeierModel) -> Result<(ProcessConfig, GratingSpec, WavelengthGrid), CliError> {
    let p = process(0.532, Sense::Backward);
    let g = GratingSpec::new(2.132, 0.5, CRYSTAL_LENGTH_UM);
    let root = find_qpm(model, g.period_um, &p, (1.0, 1.1), 1..=15)?.solution.signal_um;
    Ok((p, g, WavelengthGrid::centered(root, 0.0004, 201)?))
}

pub const FIG1B_SIGMAS_UM: [f64; 3] = [0.0, 0.175, 0.3];

#[derive(Debug, Clone, Serialize)]
pub struct DisorderLevel {
    pub sigma_um: f64,
    pub mean_peak: f64,
    pub sem_at_peak: f64,
    pub peak_wavelength_um: f64,
}

/// Ensembles at each disorder level on the same grid and seed set.
pub fn fig1b_ensembles(
    model: &SellmeierModel,
    opts: &RecipeOptions,
) -> Result<(WavelengthGrid, Vec<(DisorderLevel, EnsembleStatistics)>), CliError> {
    let (p, g, grid) = fig1b_setup(model)?;
    let mut out = Vec::new();
    for &s in &FIG1B_SIGMAS_UM {
        let cfg = EnsembleConfig::new(
            GratingSpec { sigma_um: s, ..g },
            p,
            grid.clone(),
            opts.realizations,
            opts.master_seed,
        );
        let stats = run_ensemble(model, &cfg)?;
        let i = (0..stats.mean.len())
            .max_by(|&a, &b| stats.mean[a].total_cmp(&stats.mean[b]))
            .unwrap_or(0);
        let level = DisorderLevel {
            sigma_um: s,
            mean_peak: stats.mean[i],
            sem_at_peak: stats.sem[i],
            peak_wavelength_um: grid.points()[i],
        };
        out.push((level, stats));
    }
    Ok((grid, out))
}

fn fig1b(model: &SellmeierModel, opts: &RecipeOptions) -> Result<RecipeOutput, CliError> {
    let (grid, levels) = fig1b_ensembles(model, opts)?;
    let (p, g, _) = fig1b_setup(model)?;
    let mut singles = Vec::new();
    for &s in &FIG1B_SIGMAS_UM {
        let cfg = EnsembleConfig::new(GratingSpec { sigma_um: s, ..g }, p, grid.clone(), 1, opts.master_seed);
        singles.push(single_realization(model, &cfg, 0)?.values);
    }
    let mut csv = String::new();
    let _ = writeln!(csv, "# recipe=fig1b backward 532 nm, period 2.132 um, D=0.5, L=11 mm");
    let _ = writeln!(
        csv,
        "# realizations={} master_seed={}",
        opts.realizations, opts.master_seed
    );
    let mut header = vec!["wavelength_nm".to_string()];
    for s in FIG1B_SIGMAS_UM {
        let nm = (s * 1e3).round();
        header.push(format!("single_{nm}nm"));
        header.push(format!("mean_{nm}nm"));
        header.push(format!("sem_{nm}nm"));
    }
    let _ = writeln!(csv, "{}", header.join(","));
    for (i, &l) in grid.points().iter().enumerate() {
        let mut row = vec![e(l * 1e3)];
        for (single, (_, stats)) in singles.iter().zip(&levels) {
            row.push(e(single[i]));
            row.push(e(stats.mean[i]));
            row.push(e(stats.sem[i]));
        }
        let _ = writeln!(csv, "{}", row.join(","));
    }
    let summary: Vec<&DisorderLevel> = levels.iter().map(|(l, _)| l).collect();
    Ok(RecipeOutput {
        csv,
        summary: json!({ "recipe": "fig1b", "levels": summary }),
    })
}

fn fig1c(model: &SellmeierModel) -> Result<RecipeOutput, CliError> {
    let pumps: Vec<f64> = (0..=36).map(|i| 0.420 + 0.005 * i as f64).collect();
    let curve = nbpm_curve(model, &process(0.532, Sense::Forward), &pumps)?;
    let mut csv = String::from("# recipe=fig1c forward type-II NBPM roots\npump_nm,signal_nm,idler_nm,residual\n");
    for (p, s) in &curve {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            e(p * 1e3),
            e(s.signal_um * 1e3),
            e(s.idler_um * 1e3),
            e(s.residual)
        );
    }
    let at = |x: f64| {
        curve
            .iter()
            .find(|(p, _)| (p - x).abs() < 1e-9)
            .map(|(_, s)| (s.signal_um, s.idler_um))
    };
    Ok(RecipeOutput {
        csv,
        summary: json!({ "recipe": "fig1c", "points": curve.len(), "pump_532": at(0.532) }),
    })
}

/// Forward 532 nm NBPM spectra of the ideal grating for several duty cycles.
pub fn fig1d_spectra(model: &SellmeierModel) -> Result<(WavelengthGrid, Vec<(f64, Spectrum)>), CliError> {
    let p = process(0.532, Sense::Forward);
    let root = find_nbpm(model, &p, (1.0, 1.08))?.signal_um;
    let grid = WavelengthGrid::centered(root, 0.006, 601)?;
    let mut out = Vec::new();
    for d in [0.6, 0.7, 0.8, 0.9] {
        let g = GratingSpec::new(2.132, d, CRYSTAL_LENGTH_UM);
        out.push((d, compute_spectrum(model, &grid, &p, SpectrumSource::Grating(&g))?));
    }
    Ok((grid, out))
}

fn fig1d(model: &SellmeierModel) -> Result<RecipeOutput, CliError> {
    let (grid, spectra) = fig1d_spectra(model)?;
    let mut csv = String::from("# recipe=fig1d forward 532 nm NBPM, period 2.132 um, L=11 mm, ideal grating\n");
    let names: Vec<String> = spectra.iter().map(|(d, _)| format!("S_D{d}")).collect();
    let _ = writeln!(csv, "wavelength_nm,{}", names.join(","));
    for i in 0..grid.len() {
        let cols: Vec<String> = spectra.iter().map(|(_, s)| e(s.values[i])).collect();
        let _ = writeln!(csv, "{},{}", e(grid.points()[i] * 1e3), cols.join(","));
    }
    let peaks: Vec<_> = spectra
        .iter()
        .map(|(d, s)| json!({ "duty_cycle": d, "peak": s.max_value() }))
        .collect();
    Ok(RecipeOutput {
        csv,
        summary: json!({ "recipe": "fig1d", "peaks": peaks }),
    })
}

/// Single disordered realization around the NBPM line, raw and at 1 nm resolution.
fn nbpm_realization(
    model: &SellmeierModel,
    name: &str,
    grating: GratingSpec,
    opts: &RecipeOptions,
) -> Result<RecipeOutput, CliError> {
    let p = process(0.532, Sense::Forward);
    let root = find_nbpm(model, &p, (1.0, 1.08))?.signal_um;
    let grid = WavelengthGrid::centered(root, 0.012, 1201)?;
    let raw = if grating.sigma_um > 0.0 {
        let cfg = EnsembleConfig::new(grating, p, grid.clone(), 1, opts.master_seed);
        single_realization(model, &cfg, 0)?
    } else {
        compute_spectrum(model, &grid, &p, SpectrumSource::Grating(&grating))?
    };
    let resolved = convolve_resolution(&raw, 1.0, ResolutionKernel::TopHat)?;
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# recipe={name} forward 532 nm NBPM, period {} um, D={}, sigma={} um, L=11 mm",
        grating.period_um, grating.duty_cycle, grating.sigma_um
    );
    if grating.sigma_um > 0.0 {
        let _ = writeln!(csv, "# master_seed={} realization=0", opts.master_seed);
    }
    let _ = writeln!(csv, "wavelength_nm,S_raw,S_resolution_1nm");
    for i in 0..grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            e(grid.points()[i] * 1e3),
            e(raw.values[i]),
            e(resolved.values[i])
        );
    }
    let m_raw = peak_metrics(&raw, 0.05)?;
    let m_res = peak_metrics(&resolved, 0.05)?;
    let summary = json!({
        "recipe": name,
        "nbpm_root_um": root,
        "raw_fwhm_nm": m_raw.fwhm_nm,
        "raw_side_peaks": m_raw.side_peaks.len(),
        "resolved_fwhm_nm": m_res.fwhm_nm,
        "raw_integral": raw.integral(),
        "resolved_integral": resolved.integral(),
    });
    Ok(RecipeOutput { csv, summary })
}

/// Forward 405 nm process with a first-order QPM line for an 8.9 um period.
pub fn fig5d_setup(model: &SellmeierModel) -> Result<Fig5dSetup, CliError> {
    let p = process(0.405, Sense::Forward);
    let g = GratingSpec::new(8.9, 0.6, CRYSTAL_LENGTH_UM).with_disorder(0.9, 0);
    let qpm = find_qpm(model, g.period_um, &p, (0.7, 1.2), 1..=3)?.solution.signal_um;
    let nbpm = find_nbpm(model, &p, (0.5, 0.7))?.signal_um;
    let (qs, ns) = (0.006, 0.0006);
    let grid = WavelengthGrid::union(&[
        WavelengthGrid::centered(nbpm, ns, 121)?,
        WavelengthGrid::centered(qpm, qs, 301)?,
    ])?;
    Ok(Fig5dSetup {
        process: p,
        grating: g,
        grid,
        qpm_window: (qpm - qs / 2.0, qpm + qs / 2.0),
        nbpm_window: (nbpm - ns / 2.0, nbpm + ns / 2.0),
    })
}

pub struct Fig5dSetup {
    pub process: ProcessConfig,
    pub grating: GratingSpec,
    pub grid: WavelengthGrid,
    pub qpm_window: (f64, f64),
    pub nbpm_window: (f64, f64),
}

pub fn fig5d_run(
    model: &SellmeierModel,
    opts: &RecipeOptions,
) -> Result<(Fig5dSetup, Spectrum, EnsembleStatistics, ReductionSummary), CliError> {
    let s = fig5d_setup(model)?;
    let ideal = GratingSpec {
        sigma_um: 0.0,
        ..s.grating
    };
    let reference = compute_spectrum(model, &s.grid, &s.process, SpectrumSource::Grating(&ideal))?;
    let cfg = EnsembleConfig::new(
        s.grating,
        s.process,
        s.grid.clone(),
        opts.realizations,
        opts.master_seed,
    );
    let stats = run_ensemble(model, &cfg)?;
    let summary = reduction_summary(&stats, &reference, s.qpm_window, Some(s.nbpm_window))?;
    Ok((s, reference, stats, summary))
}

fn fig5d(model: &SellmeierModel, opts: &RecipeOptions) -> Result<RecipeOutput, CliError> {
    let (s, reference, stats, summary) = fig5d_run(model, opts)?;
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# recipe=fig5d forward 405 nm, period 8.9 um, D=0.6, sigma=0.9 um, L=11 mm"
    );
    let _ = writeln!(
        csv,
        "# realizations={} master_seed={}",
        opts.realizations, opts.master_seed
    );
    let _ = writeln!(csv, "wavelength_nm,S_ideal,mean_S,std_S,sem_S");
    for i in 0..s.grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            e(s.grid.points()[i] * 1e3),
            e(reference.values[i]),
            e(stats.mean[i]),
            e(stats.std[i]),
            e(stats.sem[i])
        );
    }
    Ok(RecipeOutput {
        csv,
        summary: json!({
            "recipe": "fig5d",
            "reduction": summary.reduction(),
            "reduction_ci95": [summary.reduction() - 1.96 * summary.peak_ratio_sem, summary.reduction() + 1.96 * summary.peak_ratio_sem],
            "summary": summary,
        }),
    })
}

pub fn run_recipe(model: &SellmeierModel, figure: Figure, opts: &RecipeOptions) -> Result<RecipeOutput, CliError> {
    match figure {
        Figure::Fig1b => fig1b(model, opts),
        Figure::Fig1c => fig1c(model),
        Figure::Fig1d => fig1d(model),
        Figure::Fig5a => nbpm_realization(
            model,
            "fig5a",
            GratingSpec::new(2.112, 0.5, CRYSTAL_LENGTH_UM).with_disorder(0.45, 0),
            opts,
        ),
        Figure::Fig5b => nbpm_realization(
            model,
            "fig5b",
            GratingSpec::new(2.132, 0.5, CRYSTAL_LENGTH_UM).with_disorder(0.6, 0),
            opts,
        ),
        Figure::Fig5c => nbpm_realization(model, "fig5c", GratingSpec::new(2.152, 0.6, CRYSTAL_LENGTH_UM), opts),
        Figure::Fig5d => fig5d(model, opts),
    }
}
