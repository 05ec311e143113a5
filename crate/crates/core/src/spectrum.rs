//! Wavelength grids, spectra and spectral post-processing.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplitude::{
    amplitude_analytic_terms, amplitude_numeric_terms, check_analytic, spectral_density, ProcessConfig,
};
use crate::dispersion::{PhaseTerms, SellmeierModel};
use crate::error::{param, Error, Result};
use crate::grating::{build_ideal, perturb, DomainStructure, GratingSpec};

/// Strictly increasing list of signal vacuum wavelengths in um.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavelengthGrid(Vec<f64>);

impl WavelengthGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(param("wavelength grid is empty"));
        }
        if let Some(bad) = points.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(param(format!("grid wavelength {bad} must be positive and finite")));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(param(format!(
                    "grid must be strictly increasing: point {} = {} then {}",
                    i, w[0], w[1]
                )));
            }
        }
        Ok(Self(points))
    }

    /// `points` samples evenly spaced over `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(param("a linear grid needs at least 2 points"));
        }
        let step = (hi - lo) / (points - 1) as f64;
        Self::new((0..points).map(|i| lo + step * i as f64).collect())
    }

    pub fn centered(center_um: f64, span_um: f64, points: usize) -> Result<Self> {
        Self::linspace(center_um - 0.5 * span_um, center_um + 0.5 * span_um, points)
    }

    /// Merges several grids into one sorted grid, dropping exact duplicates.
    pub fn union(parts: &[WavelengthGrid]) -> Result<Self> {
        let mut all: Vec<f64> = parts.iter().flat_map(|g| g.0.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        Self::new(all)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The common spacing if all steps agree to 1e-6 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.0.len() < 2 {
            return None;
        }
        let step = (self.0[self.0.len() - 1] - self.0[0]) / (self.0.len() - 1) as f64;
        self.0
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step)
            .then_some(step)
    }
}

impl TryFrom<Vec<f64>> for WavelengthGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WavelengthGrid> for Vec<f64> {
    fn from(g: WavelengthGrid) -> Vec<f64> {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Numeric,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::Numeric => "numeric",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Method::Analytic),
            "numeric" => Ok(Method::Numeric),
            other => Err(param(format!("unknown method '{other}', expected analytic or numeric"))),
        }
    }
}

/// Provenance of a spectrum. Extra pairs are written verbatim into CSV headers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumMeta {
    pub method: Option<Method>,
    pub process_digest: String,
    pub grating_digest: String,
    pub seed: Option<u64>,
    pub order: Option<usize>,
    pub resolution_nm: Option<f64>,
    pub extra: BTreeMap<String, String>,
}

/// Short hex digest of a serializable value.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("plain data serializes");
    Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: WavelengthGrid,
    pub values: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(param(format!(
                "spectrum has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(param(format!("spectral density {v} must be finite and non-negative")));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn wavelengths(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Copy scaled to unit maximum.
    pub fn normalized(&self) -> Result<Spectrum> {
        let peak = self.max_value();
        if !(peak > 0.0) {
            return Err(Error::NoPeak("spectrum is identically zero".into()));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v /= peak);
        Ok(out)
    }

    /// Trapezoidal integral over wavelength (um).
    pub fn integral(&self) -> f64 {
        self.grid
            .points()
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Largest sample with wavelength in `[lo, hi]`: `(index, wavelength, S)`.
    pub fn peak_in(&self, lo_um: f64, hi_um: f64) -> Option<(usize, f64, f64)> {
        self.wavelengths()
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(_, (l, _))| **l >= lo_um && **l <= hi_um)
            .fold(None, |best: Option<(usize, f64, f64)>, (i, (l, s))| match best {
                Some((_, _, b)) if b >= *s => best,
                _ => Some((i, *l, *s)),
            })
    }

    /// CSV with `# key=value` metadata lines and 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write_meta(&mut out, &self.meta)?;
        writeln!(out, "wavelength_nm,S_relative")?;
        for (l, s) in self.wavelengths().iter().zip(&self.values) {
            writeln!(out, "{},{}", sig9(l * 1e3), sig9(*s))?;
        }
        Ok(())
    }

    /// Reads a two-column spectrum CSV (`wavelength_nm`, density).
    pub fn read_csv<R: Read>(input: R) -> Result<Spectrum> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("wavelength_nm") || headers.len() < 2 {
            return Err(Error::Format(format!(
                "expected header 'wavelength_nm,<density>', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64> {
                rec.get(col)
                    .ok_or_else(|| Error::Format(format!("row {}: missing column {col}", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))
            };
            grid.push(parse(0)? * 1e-3);
            values.push(parse(1)?);
        }
        Spectrum::new(WavelengthGrid::new(grid)?, values, SpectrumMeta::default())
    }
}

pub(crate) fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub(crate) fn write_meta<W: Write>(out: &mut W, meta: &SpectrumMeta) -> std::io::Result<()> {
    if let Some(m) = meta.method {
        writeln!(out, "# method={m}")?;
    }
    if !meta.process_digest.is_empty() {
        writeln!(out, "# process_digest={}", meta.process_digest)?;
    }
    if !meta.grating_digest.is_empty() {
        writeln!(out, "# grating_digest={}", meta.grating_digest)?;
    }
    if let Some(s) = meta.seed {
        writeln!(out, "# seed={s}")?;
    }
    if let Some(m) = meta.order {
        writeln!(out, "# truncation_order={m}")?;
    }
    if let Some(r) = meta.resolution_nm {
        writeln!(out, "# resolution_nm={r}")?;
    }
    for (k, v) in &meta.extra {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Phase terms for every grid point, computed once and reused across structures.
#[derive(Debug, Clone)]
pub struct PhasePlan {
    pub grid: WavelengthGrid,
    pub terms: Vec<PhaseTerms>,
}

impl PhasePlan {
    pub fn new(model: &SellmeierModel, grid: &WavelengthGrid, process: &ProcessConfig) -> Result<Self> {
        let terms = grid
            .points()
            .iter()
            .map(|&l| process.terms(model, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            terms,
        })
    }

    pub fn numeric_values(&self, structure: &DomainStructure, coupling: f64) -> Vec<f64> {
        self.terms
            .par_iter()
            .map(|t| spectral_density(amplitude_numeric_terms(t, structure, coupling)))
            .collect()
    }

    pub fn analytic_values(&self, grating: &GratingSpec, coupling: f64, order: usize) -> Vec<f64> {
        self.terms
            .par_iter()
            .map(|t| spectral_density(amplitude_analytic_terms(t, grating, coupling, order)))
            .collect()
    }
}

/// Largest complex difference between the analytic and numeric amplitudes of
/// an unperturbed grating over `grid`, relative to the largest numeric `|B|`.
pub fn route_discrepancy(
    model: &SellmeierModel,
    grid: &WavelengthGrid,
    process: &ProcessConfig,
    grating: &GratingSpec,
    order: usize,
) -> Result<f64> {
    check_analytic(grating, order)?;
    process.validate()?;
    let plan = PhasePlan::new(model, grid, process)?;
    let structure = build_ideal(grating)?;
    let pairs: Vec<(f64, f64)> = plan
        .terms
        .par_iter()
        .map(|t| {
            let a = amplitude_analytic_terms(t, grating, process.coupling, order);
            let n = amplitude_numeric_terms(t, &structure, process.coupling);
            ((a - n).norm(), n.norm())
        })
        .collect();
    let diff = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let scale = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Undefined("numeric amplitude over the grid".into()));
    }
    Ok(diff / scale)
}

/// What a spectrum is computed from.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumSource<'a> {
    /// Fourier series of the unperturbed grating, harmonics up to `order`.
    Analytic { grating: &'a GratingSpec, order: usize },
    /// Exact integral over a given structure.
    Structure(&'a DomainStructure),
    /// Realize the grating (ideal, then perturbed with its own seed) and integrate.
    Grating(&'a GratingSpec),
}

/// The structure a [`GratingSpec`] describes: ideal when `sigma = 0`, else
/// perturbed with a ChaCha8 stream seeded from `spec.seed`.
pub fn realize(spec: &GratingSpec) -> Result<DomainStructure> {
    let ideal = build_ideal(spec)?;
    if spec.sigma_um == 0.0 {
        return Ok(ideal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(perturb(&ideal, spec.sigma_um, &mut rng)?.structure)
}

pub fn compute_spectrum(
    model: &SellmeierModel,
    grid: &WavelengthGrid,
    process: &ProcessConfig,
    source: SpectrumSource<'_>,
) -> Result<Spectrum> {
    process.validate()?;
    let plan = PhasePlan::new(model, grid, process)?;
    let mut meta = SpectrumMeta {
        process_digest: digest(process),
        ..Default::default()
    };
    let values = match source {
        SpectrumSource::Analytic { grating, order } => {
            check_analytic(grating, order)?;
            meta.method = Some(Method::Analytic);
            meta.grating_digest = digest(grating);
            meta.order = Some(order);
            plan.analytic_values(grating, process.coupling, order)
        }
        SpectrumSource::Structure(s) => {
            meta.method = Some(Method::Numeric);
            meta.grating_digest = digest(&s.boundaries());
            plan.numeric_values(s, process.coupling)
        }
        SpectrumSource::Grating(g) => {
            let s = realize(g)?;
            meta.method = Some(Method::Numeric);
            meta.grating_digest = digest(g);
            if g.sigma_um > 0.0 {
                meta.seed = Some(g.seed);
            }
            plan.numeric_values(&s, process.coupling)
        }
    };
    Spectrum::new(grid.clone(), values, meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionKernel {
    /// Unit-area rectangle of width equal to the FWHM (bandpass filter).
    #[default]
    TopHat,
    Gaussian,
}

/// Convolves with a unit-area kernel of the given FWHM in nm.
///
/// Needs a uniform grid with spacing below a quarter of the FWHM. Samples
/// beyond the grid edges are taken as zero.
pub fn convolve_resolution(spectrum: &Spectrum, fwhm_nm: f64, kernel: ResolutionKernel) -> Result<Spectrum> {
    if !(fwhm_nm >= 0.0 && fwhm_nm.is_finite()) {
        return Err(param(format!("resolution FWHM must be non-negative, got {fwhm_nm} nm")));
    }
    if fwhm_nm == 0.0 {
        return Ok(spectrum.clone());
    }
    let step_nm = spectrum
        .grid
        .uniform_step()
        .ok_or_else(|| param("resolution convolution needs a uniform wavelength grid"))?
        * 1e3;
    if step_nm >= fwhm_nm / 4.0 {
        return Err(param(format!(
            "grid spacing {step_nm} nm is too coarse for a {fwhm_nm} nm kernel (needs < {})",
            fwhm_nm / 4.0
        )));
    }
    let weights = kernel_weights(fwhm_nm / step_nm, kernel);
    let half = (weights.len() / 2) as isize;
    let n = spectrum.values.len() as isize;
    let values = (0..n)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .filter_map(|(k, w)| {
                    let j = i + k as isize - half;
                    (0..n).contains(&j).then(|| w * spectrum.values[j as usize])
                })
                .sum()
        })
        .collect();
    let mut meta = spectrum.meta.clone();
    meta.resolution_nm = Some(fwhm_nm);
    Spectrum::new(spectrum.grid.clone(), values, meta)
}

/// Symmetric discrete kernel for a FWHM expressed in grid steps, summing to one.
fn kernel_weights(fwhm_steps: f64, kernel: ResolutionKernel) -> Vec<f64> {
    let raw: Vec<f64> = match kernel {
        ResolutionKernel::TopHat => {
            // Overlap of each unit cell [j - 1/2, j + 1/2] with [-r, r].
            let r = 0.5 * fwhm_steps;
            let half = (r + 0.5).ceil() as isize;
            (-half..=half)
                .map(|j| {
                    let j = j as f64;
                    ((j + 0.5).min(r) - (j - 0.5).max(-r)).max(0.0)
                })
                .collect()
        }
        ResolutionKernel::Gaussian => {
            let sigma = fwhm_steps / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
            let half = (5.0 * sigma).ceil() as isize;
            (-half..=half)
                .map(|j| (-(j as f64).powi(2) / (2.0 * sigma * sigma)).exp())
                .collect()
        }
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidePeak {
    pub wavelength_um: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakMetrics {
    pub wavelength_um: f64,
    pub value: f64,
    pub fwhm_nm: f64,
    /// True when a half-maximum crossing was not found before a grid edge.
    pub fwhm_truncated: bool,
    pub side_peaks: Vec<SidePeak>,
}

/// Global maximum, FWHM from interpolated half-maximum crossings, and the
/// local maxima above `side_floor * peak`.
pub fn peak_metrics(spectrum: &Spectrum, side_floor: f64) -> Result<PeakMetrics> {
    let s = &spectrum.values;
    let x = spectrum.wavelengths();
    if s.len() < 3 {
        return Err(param(format!("peak metrics need at least 3 points, got {}", s.len())));
    }
    let (imax, peak) = s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if !(peak > min) {
        return Err(Error::NoPeak("spectrum is flat".into()));
    }
    let half = 0.5 * peak;
    let mut truncated = false;

    let mut left = x[0];
    match (0..imax).rev().find(|&i| s[i] < half) {
        Some(i) => left = x[i] + (half - s[i]) / (s[i + 1] - s[i]) * (x[i + 1] - x[i]),
        None => truncated = true,
    }
    let mut right = x[x.len() - 1];
    match (imax + 1..s.len()).find(|&i| s[i] < half) {
        Some(i) => right = x[i - 1] + (s[i - 1] - half) / (s[i - 1] - s[i]) * (x[i] - x[i - 1]),
        None => truncated = true,
    }

    let floor = side_floor * peak;
    let side_peaks = (1..s.len() - 1)
        .filter(|&i| i != imax && s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] > floor && s[i] < peak)
        .map(|i| SidePeak {
            wavelength_um: x[i],
            value: s[i],
        })
        .collect();

    Ok(PeakMetrics {
        wavelength_um: x[imax],
        value: peak,
        fwhm_nm: (right - left) * 1e3,
        fwhm_truncated: truncated,
        side_peaks,
    })
}
