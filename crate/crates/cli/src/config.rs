//! Scenario files: one JSON object per section, unknown keys rejected.

use std::path::Path;

use qpm_core::analysis::FitOptions;
use qpm_core::{GratingSpec, Method, ProcessConfig, ResolutionKernel, SellmeierModel, WavelengthGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    /// Built-in data set, `fan1987` or `kato1991`.
    #[serde(default = "default_model")]
    pub model: String,
    /// Explicit coefficients; replace the named set when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<SellmeierModel>,
}

fn default_model() -> String {
    "fan1987".into()
}

impl Default for DispersionSection {
    fn default() -> Self {
        Self {
            model: default_model(),
            coefficients: None,
        }
    }
}

impl DispersionSection {
    pub fn resolve(&self) -> Result<SellmeierModel, String> {
        let m = match &self.coefficients {
            Some(c) => c.clone(),
            None => SellmeierModel::named(&self.model)
                .ok_or_else(|| format!("unknown Sellmeier set '{}', expected fan1987 or kato1991", self.model))?,
        };
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSegment {
    pub center_um: f64,
    pub span_um: f64,
    pub points: usize,
}

/// Either a centred uniform grid, an explicit list, or a union of segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelengths_um: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<GridSegment>>,
}

impl GridSpec {
    pub fn centered(center_um: f64, span_um: f64, points: usize) -> Self {
        Self {
            center_um: Some(center_um),
            span_um: Some(span_um),
            points: Some(points),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<WavelengthGrid, String> {
        let uniform = [self.center_um.is_some(), self.span_um.is_some(), self.points.is_some()];
        let forms =
            uniform.iter().any(|&b| b) as u8 + self.wavelengths_um.is_some() as u8 + self.segments.is_some() as u8;
        if forms != 1 {
            return Err("give exactly one of center_um/span_um/points, wavelengths_um or segments".into());
        }
        let grid = if let Some(list) = &self.wavelengths_um {
            WavelengthGrid::new(list.clone())
        } else if let Some(segs) = &self.segments {
            let parts = segs
                .iter()
                .map(|s| WavelengthGrid::centered(s.center_um, s.span_um, s.points))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            WavelengthGrid::union(&parts)
        } else {
            match (self.center_um, self.span_um, self.points) {
                (Some(c), Some(s), Some(n)) => WavelengthGrid::centered(c, s, n),
                _ => return Err("a uniform grid needs center_um, span_um and points".into()),
            }
        };
        grid.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Harmonic truncation of the analytic route.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Spectral resolution FWHM; 0 disables broadening.
    #[serde(default)]
    pub resolution_nm: f64,
    #[serde(default)]
    pub kernel: ResolutionKernel,
}

fn default_method() -> Method {
    Method::Numeric
}
fn default_order() -> usize {
    50
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            order: default_order(),
            resolution_nm: 0.0,
            kernel: ResolutionKernel::TopHat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub first_index: u64,
    #[serde(default = "default_side_floor")]
    pub side_floor: f64,
    /// Window holding the QPM peak; enables the reduction summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpm_window_um: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbpm_window_um: Option<[f64; 2]>,
}

fn default_realizations() -> usize {
    200
}
fn default_side_floor() -> f64 {
    0.05
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            realizations: default_realizations(),
            master_seed: 0,
            first_index: 0,
            side_floor: default_side_floor(),
            qpm_window_um: None,
            nbpm_window_um: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Qpm,
    Nbpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasematchSection {
    #[serde(default = "default_mode")]
    pub mode: MatchMode,
    #[serde(default = "default_window")]
    pub window_um: [f64; 2],
    /// Inclusive range of `|m|`.
    #[serde(default = "default_orders")]
    pub orders: [u32; 2],
}

fn default_mode() -> MatchMode {
    MatchMode::Qpm
}
fn default_window() -> [f64; 2] {
    [1.0, 1.1]
}
fn default_orders() -> [u32; 2] {
    [1, 15]
}

impl Default for PhasematchSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            window_um: default_window(),
            orders: default_orders(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub dispersion: DispersionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grating: Option<GratingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub phasematch: PhasematchSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitOptions>,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; errors carry `source:line:column`.
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let tail = format!(" at line {} column {}", e.line(), e.column());
            let msg = msg.strip_suffix(&tail).unwrap_or(&msg);
            CliError::Config(format!("{source}:{}:{}: {msg}", e.line(), e.column()))
        })?;
        cfg.validate().map_err(|(section, msg)| {
            let at = line_of(text, section).map(|l| format!("{l}:")).unwrap_or_default();
            CliError::Config(format!("{source}:{at} [{section}] {msg}"))
        })?;
        Ok(cfg)
    }

    /// Checks every section that is present; reports the offending section.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        self.dispersion.resolve().map_err(|e| ("dispersion", e))?;
        if let Some(g) = &self.grating {
            g.validate().map_err(|e| ("grating", e.to_string()))?;
        }
        if let Some(p) = &self.process {
            p.validate().map_err(|e| ("process", e.to_string()))?;
        }
        if let Some(g) = &self.grid {
            g.build().map_err(|e| ("grid", e))?;
        }
        let s = &self.spectrum;
        if s.order < 1 {
            return Err(("spectrum", "order must be at least 1".into()));
        }
        if !(s.resolution_nm >= 0.0 && s.resolution_nm.is_finite()) {
            return Err((
                "spectrum",
                format!("resolution_nm must be non-negative, got {}", s.resolution_nm),
            ));
        }
        let e = &self.ensemble;
        if e.realizations < 1 {
            return Err(("ensemble", "realizations must be at least 1".into()));
        }
        for w in [e.qpm_window_um, e.nbpm_window_um].into_iter().flatten() {
            if !(w[0] < w[1]) {
                return Err(("ensemble", format!("window [{}, {}] um is empty", w[0], w[1])));
            }
        }
        let pm = &self.phasematch;
        if !(pm.window_um[0] < pm.window_um[1]) {
            return Err((
                "phasematch",
                format!("window [{}, {}] um is empty", pm.window_um[0], pm.window_um[1]),
            ));
        }
        if pm.orders[0] < 1 || pm.orders[0] > pm.orders[1] {
            return Err((
                "phasematch",
                format!("orders [{}, {}] must satisfy 1 <= lo <= hi", pm.orders[0], pm.orders[1]),
            ));
        }
        if let Some(f) = &self.fit {
            f.validate().map_err(|e| ("fit", e.to_string()))?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SellmeierModel, CliError> {
        self.dispersion.resolve().map_err(CliError::Config)
    }

    pub fn grating(&self) -> Result<GratingSpec, CliError> {
        self.grating
            .ok_or_else(|| CliError::Config("missing section 'grating'".into()))
    }

    pub fn process(&self) -> Result<ProcessConfig, CliError> {
        self.process
            .ok_or_else(|| CliError::Config("missing section 'process'".into()))
    }

    pub fn grid(&self) -> Result<WavelengthGrid, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::Config("missing section 'grid'".into()))?
            .build()
            .map_err(CliError::Config)
    }

    /// Single-line JSON of the effective configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
