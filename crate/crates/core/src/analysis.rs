//! Phase-matching solvers, ratio diagnostics and disorder fitting.

use std::f64::consts::PI;
use std::io::Read;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{sinc, ProcessConfig};
use crate::dispersion::{idler_wavelength, SellmeierModel, Sense};
use crate::ensemble::{reduce, EnsembleConfig};
use crate::error::{param, Error, Result};
use crate::grating::{grating_vector, GratingSpec};
use crate::spectrum::{PhasePlan, Spectrum};

/// Initial scan step of the root bracketing, um (0.1 nm).
pub const SCAN_STEP_UM: f64 = 1e-4;
/// Target |dk + K_m| at a returned root, rad/um.
pub const ROOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMatchSolution {
    pub signal_um: f64,
    pub idler_um: f64,
    /// Harmonic order; 0 for birefringent phase matching.
    pub order: i64,
    /// `|dk + K_m|` re-evaluated at the returned wavelength, rad/um.
    pub residual: f64,
}

/// Signal wavelengths for which both signal and idler lie in the Sellmeier window.
pub fn admissible_signal_range(model: &SellmeierModel, pump_um: f64) -> Result<(f64, f64)> {
    let [lo, hi] = model.window_um;
    model.check_window(pump_um)?;
    // idler <= hi  <=>  signal >= 1 / (1/pump - 1/hi)
    let from_idler = if pump_um < hi {
        1.0 / (1.0 / pump_um - 1.0 / hi)
    } else {
        f64::INFINITY
    };
    let lower = lo.max(from_idler * (1.0 + 1e-12)).max(pump_um * (1.0 + 1e-12));
    if lower > hi {
        return Err(param(format!(
            "no admissible signal wavelengths for a {pump_um} um pump"
        )));
    }
    Ok((lower, hi))
}

/// `(x0, f0, x1, f1)` with a sign change between the ends.
type Bracket = (f64, f64, f64, f64);

/// Samples `f` every `step` over `[lo, hi]` and returns the sign-change brackets
/// together with the sampled extrema.
fn scan<F>(f: &F, lo: f64, hi: f64, step: f64) -> Result<(Vec<Bracket>, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + step * i as f64 })
        .collect();
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let brackets = (0..n)
        .filter(|&i| ys[i] == 0.0 || ys[i].signum() != ys[i + 1].signum())
        .map(|i| (xs[i], ys[i], xs[i + 1], ys[i + 1]))
        .collect();
    Ok((brackets, min, max))
}

fn bisect<F>(f: &F, mut a: f64, mut fa: f64, mut b: f64, fb: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut best, mut fbest) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..200 {
        if fbest.abs() < ROOT_TOLERANCE {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm.abs() < fbest.abs() {
            best = m;
            fbest = fm;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(best)
}

fn solution(
    model: &SellmeierModel,
    process: &ProcessConfig,
    signal_um: f64,
    k: f64,
    order: i64,
) -> Result<PhaseMatchSolution> {
    let pump = process.mismatch.pump.wavelength_um;
    // Independent re-evaluation of the mismatch at the root.
    let residual = (process.mismatch.phase_mismatch(model, signal_um)? + k).abs();
    Ok(PhaseMatchSolution {
        signal_um,
        idler_um: idler_wavelength(pump, signal_um)?,
        order,
        residual,
    })
}

fn clip_window(model: &SellmeierModel, process: &ProcessConfig, window: (f64, f64)) -> Result<(f64, f64)> {
    if !(window.0 < window.1) {
        return Err(param(format!("search window [{}, {}] um is empty", window.0, window.1)));
    }
    let (alo, ahi) = admissible_signal_range(model, process.mismatch.pump.wavelength_um)?;
    let lo = window.0.max(alo);
    let hi = window.1.min(ahi);
    if !(lo < hi) {
        return Err(param(format!(
            "search window [{}, {}] um has no signal wavelengths with both waves in [{alo}, {ahi}] um",
            window.0, window.1
        )));
    }
    Ok((lo, hi))
}

/// Root of `dk = 0` for a forward process, lowest-wavelength root first.
pub fn find_nbpm_with_step(
    model: &SellmeierModel,
    process: &ProcessConfig,
    window: (f64, f64),
    step_um: f64,
) -> Result<PhaseMatchSolution> {
    process.validate()?;
    if process.mismatch.sense != Sense::Forward {
        return Err(param(
            "birefringent phase matching is searched for forward processes only",
        ));
    }
    let (lo, hi) = clip_window(model, process, window)?;
    let f = |l: f64| process.mismatch.phase_mismatch(model, l);
    let (brackets, min, max) = scan(&f, lo, hi, step_um)?;
    let &(a, fa, b, fb) = brackets.first().ok_or_else(|| Error::NoRoot {
        what: "dk".into(),
        lo_um: lo,
        hi_um: hi,
        detail: format!(" (dk ranges over [{min:.6e}, {max:.6e}] rad/um)"),
    })?;
    let root = bisect(&f, a, fa, b, fb)?;
    solution(model, process, root, 0.0, 0)
}

pub fn find_nbpm(model: &SellmeierModel, process: &ProcessConfig, window: (f64, f64)) -> Result<PhaseMatchSolution> {
    find_nbpm_with_step(model, process, window, SCAN_STEP_UM)
}

/// NBPM signal/idler pairs for a list of pump wavelengths, searching the
/// whole admissible signal range for each pump.
pub fn nbpm_curve(
    model: &SellmeierModel,
    process: &ProcessConfig,
    pumps_um: &[f64],
) -> Result<Vec<(f64, PhaseMatchSolution)>> {
    pumps_um
        .iter()
        .map(|&p| {
            let mut proc_p = *process;
            proc_p.mismatch.pump.wavelength_um = p;
            let window = admissible_signal_range(model, p)?;
            Ok((p, find_nbpm(model, &proc_p, window)?))
        })
        .collect()
}

/// Scan result for one harmonic order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderScan {
    pub order: i64,
    pub min: f64,
    pub max: f64,
    pub root_um: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpmSearch {
    pub solution: PhaseMatchSolution,
    /// Every order tried, with `dk + K_m` extrema over the window.
    pub scans: Vec<OrderScan>,
}

impl QpmSearch {
    pub fn admissible_orders(&self) -> Vec<i64> {
        self.scans
            .iter()
            .filter(|s| s.root_um.is_some())
            .map(|s| s.order)
            .collect()
    }
}

/// Smallest-|m| root of `dk + K_m = 0` with `|m|` in `orders`, both signs tried.
pub fn find_qpm_with_step(
    model: &SellmeierModel,
    period_um: f64,
    process: &ProcessConfig,
    window: (f64, f64),
    orders: RangeInclusive<u32>,
    step_um: f64,
) -> Result<QpmSearch> {
    process.validate()?;
    if !(period_um > 0.0) {
        return Err(param(format!("period must be positive, got {period_um} um")));
    }
    if orders.is_empty() || *orders.start() == 0 {
        return Err(param("order range must be non-empty and start at 1 or above"));
    }
    let (lo, hi) = clip_window(model, process, window)?;
    // Phase terms do not depend on m; sample them once.
    let base = |l: f64| process.mismatch.phase_mismatch(model, l);
    let mut scans = Vec::new();
    let mut found: Option<PhaseMatchSolution> = None;
    for abs_m in orders {
        for m in [abs_m as i64, -(abs_m as i64)] {
            let k = grating_vector(m, period_um);
            let f = |l: f64| base(l).map(|d| d + k);
            let (brackets, min, max) = scan(&f, lo, hi, step_um)?;
            let mut root = None;
            if let Some(&(a, fa, b, fb)) = brackets.first() {
                let r = bisect(&f, a, fa, b, fb)?;
                root = Some(r);
                if found.is_none() {
                    found = Some(solution(model, process, r, k, m)?);
                }
            }
            scans.push(OrderScan {
                order: m,
                min,
                max,
                root_um: root,
            });
        }
    }
    match found {
        Some(solution) => Ok(QpmSearch { solution, scans }),
        None => {
            let detail = scans
                .iter()
                .map(|s| format!("m={}: [{:.4e}, {:.4e}]", s.order, s.min, s.max))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::NoRoot {
                what: "dk + K_m".into(),
                lo_um: lo,
                hi_um: hi,
                detail: format!("; {detail}"),
            })
        }
    }
}

pub fn find_qpm(
    model: &SellmeierModel,
    period_um: f64,
    process: &ProcessConfig,
    window: (f64, f64),
    orders: RangeInclusive<u32>,
) -> Result<QpmSearch> {
    find_qpm_with_step(model, period_um, process, window, orders, SCAN_STEP_UM)
}

/// NBPM-to-QPM peak spectral density ratio in two forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakRatioPrediction {
    /// `k1^2 / (k0^2 sinc^2(pi n D))`, which takes the DC harmonic as `2D`.
    pub printed: f64,
    /// `k1^2 (2D - 1)^2 / (k0^2 [2 sin(pi n D) / (pi n)]^2)`.
    pub corrected: f64,
}

pub fn peak_ratio_prediction(duty: f64, order: u32, kappa_qpm: f64, kappa_nbpm: f64) -> Result<PeakRatioPrediction> {
    if !(duty > 0.0 && duty < 1.0) {
        return Err(param(format!("duty cycle must lie in (0, 1), got {duty}")));
    }
    if order < 1 {
        return Err(param("QPM order must be at least 1"));
    }
    if !(kappa_qpm > 0.0 && kappa_nbpm > 0.0) {
        return Err(param("coupling constants must be positive"));
    }
    let n = f64::from(order);
    let x = PI * n * duty;
    let coupling = (kappa_nbpm / kappa_qpm).powi(2);
    let s = sinc(x);
    let c_n = 2.0 * x.sin() / (PI * n);
    if s.abs() < 1e-15 || c_n.abs() < 1e-15 {
        return Err(Error::Undefined(format!("QPM harmonic {order} at duty cycle {duty}")));
    }
    Ok(PeakRatioPrediction {
        printed: coupling / (s * s),
        corrected: coupling * (2.0 * duty - 1.0).powi(2) / (c_n * c_n),
    })
}

/// `alpha_2d = R_c / (tau_c R_s R_i)`.
pub fn anticorrelation(coincidence_rate: f64, signal_rate: f64, idler_rate: f64, window_s: f64) -> Result<f64> {
    for (name, v) in [
        ("coincidence rate", coincidence_rate),
        ("signal singles rate", signal_rate),
        ("idler singles rate", idler_rate),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(param(format!("{name} must be non-negative, got {v}")));
        }
    }
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(param(format!("coincidence window must be positive, got {window_s} s")));
    }
    let denom = window_s * signal_rate * idler_rate;
    if denom == 0.0 {
        return Err(Error::Undefined("tau_c * R_s * R_i".into()));
    }
    Ok(coincidence_rate / denom)
}

/// Pair rates per mW of pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTable {
    #[serde(rename = "R_b")]
    pub r_b: f64,
    #[serde(rename = "R_f")]
    pub r_f: f64,
    #[serde(rename = "R_b_QPM")]
    pub r_b_qpm: f64,
    #[serde(rename = "R_f_QPM")]
    pub r_f_qpm: f64,
    #[serde(rename = "R_b_NBPM")]
    pub r_b_nbpm: f64,
    #[serde(rename = "R_f_NBPM")]
    pub r_f_nbpm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateRow {
    #[serde(default)]
    label: String,
    #[serde(rename = "R_b")]
    r_b: f64,
    #[serde(rename = "R_f")]
    r_f: f64,
    #[serde(rename = "R_b_QPM")]
    r_b_qpm: f64,
    #[serde(rename = "R_f_QPM")]
    r_f_qpm: f64,
    #[serde(rename = "R_b_NBPM")]
    r_b_nbpm: f64,
    #[serde(rename = "R_f_NBPM")]
    r_f_nbpm: f64,
}

impl RateTable {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(param(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("R_b", self.r_b),
            ("R_f", self.r_f),
            ("R_b_QPM", self.r_b_qpm),
            ("R_f_QPM", self.r_f_qpm),
            ("R_b_NBPM", self.r_b_nbpm),
            ("R_f_NBPM", self.r_f_nbpm),
        ]
    }

    /// Rows of a CSV whose header names the six rates and optionally `label`.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<(String, RateTable)>> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut out = Vec::new();
        for row in reader.deserialize::<RateRow>() {
            let r = row?;
            let t = RateTable {
                r_b: r.r_b,
                r_f: r.r_f,
                r_b_qpm: r.r_b_qpm,
                r_f_qpm: r.r_f_qpm,
                r_b_nbpm: r.r_b_nbpm,
                r_f_nbpm: r.r_f_nbpm,
            };
            t.validate()?;
            out.push((r.label, t));
        }
        Ok(out)
    }

    /// `(R_b,QPM / R_b,NBPM) / (R_f,QPM / R_f,NBPM)` before normalization.
    fn proportion_ratio(&self, which: &str) -> Result<f64> {
        let nonzero = |name: &str, v: f64| {
            if v == 0.0 {
                Err(Error::Undefined(format!("{which} {name}")))
            } else {
                Ok(v)
            }
        };
        let back = self.r_b_qpm / nonzero("R_b_NBPM", self.r_b_nbpm)?;
        let fwd = nonzero("R_f_QPM", self.r_f_qpm)? / nonzero("R_f_NBPM", self.r_f_nbpm)?;
        Ok(back / fwd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRatios {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

/// `gamma_1 = R_b,NBPM / R_f,NBPM`, `gamma_2 = R_b / R_f`, and `gamma_3`
/// normalized to the single-domain region.
pub fn gamma_ratios(grating: &RateTable, single_domain: &RateTable) -> Result<GammaRatios> {
    grating.validate()?;
    single_domain.validate()?;
    if grating.r_f_nbpm == 0.0 {
        return Err(Error::Undefined("R_f_NBPM".into()));
    }
    if grating.r_f == 0.0 {
        return Err(Error::Undefined("R_f".into()));
    }
    let reference = single_domain.proportion_ratio("single-domain")?;
    if reference == 0.0 {
        return Err(Error::Undefined("single-domain R_b_QPM".into()));
    }
    Ok(GammaRatios {
        gamma1: grating.r_b_nbpm / grating.r_f_nbpm,
        gamma2: grating.r_b / grating.r_f,
        gamma3: grating.proportion_ratio("grating")? / reference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub duty_bounds: (f64, f64),
    pub sigma_bounds_um: (f64, f64),
    /// Coarse grid points per axis.
    #[serde(default = "default_grid_points")]
    pub grid_points: (usize, usize),
    /// Realizations per objective evaluation.
    #[serde(default = "default_fit_realizations")]
    pub realizations: usize,
    /// Master seed of the frozen child-seed set.
    #[serde(default)]
    pub master_seed: u64,
    /// Golden-section iterations per axis and sweep.
    #[serde(default = "default_golden")]
    pub golden_iterations: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
}

fn default_grid_points() -> (usize, usize) {
    (7, 7)
}
fn default_fit_realizations() -> usize {
    16
}
fn default_golden() -> usize {
    12
}
fn default_sweeps() -> usize {
    2
}

impl FitOptions {
    pub fn new(duty_bounds: (f64, f64), sigma_bounds_um: (f64, f64)) -> Self {
        Self {
            duty_bounds,
            sigma_bounds_um,
            grid_points: default_grid_points(),
            realizations: default_fit_realizations(),
            master_seed: 0,
            golden_iterations: default_golden(),
            sweeps: default_sweeps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d0, d1) = self.duty_bounds;
        if !(d0 > 0.0 && d1 < 1.0 && d0 <= d1) {
            return Err(param(format!("duty bounds [{d0}, {d1}] must lie inside (0, 1)")));
        }
        let (s0, s1) = self.sigma_bounds_um;
        if !(s0 >= 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(param(format!(
                "sigma bounds [{s0}, {s1}] um must be ordered and non-negative"
            )));
        }
        if self.grid_points.0 < 1 || self.grid_points.1 < 1 || self.realizations < 1 {
            return Err(param("fit grid and realization counts must be at least 1"));
        }
        Ok(())
    }

    fn axis(bounds: (f64, f64), points: usize) -> Vec<f64> {
        if points == 1 || bounds.0 == bounds.1 {
            return vec![0.5 * (bounds.0 + bounds.1)];
        }
        (0..points)
            .map(|i| bounds.0 + (bounds.1 - bounds.0) * i as f64 / (points - 1) as f64)
            .collect()
    }

    fn step(bounds: (f64, f64), points: usize) -> f64 {
        if points > 1 {
            (bounds.1 - bounds.0) / (points - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderFit {
    pub duty_cycle: f64,
    pub sigma_um: f64,
    /// Euclidean norm of the residual between the normalized spectra.
    pub residual: f64,
    pub evaluations: usize,
    pub realizations: usize,
    pub master_seed: u64,
    pub duty_resolution: f64,
    pub sigma_resolution_um: f64,
}

/// Squared distance objective over a fixed seed set.
pub struct FitObjective<'a> {
    plan: PhasePlan,
    measured: Vec<f64>,
    base: &'a GratingSpec,
    process: &'a ProcessConfig,
    realizations: usize,
    master_seed: u64,
}

impl<'a> FitObjective<'a> {
    pub fn new(
        model: &SellmeierModel,
        measured: &Spectrum,
        base: &'a GratingSpec,
        process: &'a ProcessConfig,
        realizations: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let measured = measured.normalized()?;
        let plan = PhasePlan::new(model, &measured.grid, process)?;
        Ok(Self {
            plan,
            measured: measured.values,
            base,
            process,
            realizations,
            master_seed,
        })
    }

    /// Ensemble-mean spectrum at `(duty, sigma)` scaled to unit peak.
    pub fn simulated(&self, duty: f64, sigma_um: f64) -> Result<Vec<f64>> {
        let grating = GratingSpec {
            duty_cycle: duty,
            sigma_um,
            ..*self.base
        };
        let n = if sigma_um == 0.0 { 1 } else { self.realizations };
        let cfg = EnsembleConfig::new(grating, *self.process, self.plan.grid.clone(), n, self.master_seed);
        cfg.validate()?;
        let ideal = crate::grating::build_ideal(&grating)?;
        let samples = cfg
            .seeds()
            .into_par_iter()
            .map(|seed| {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let s = crate::grating::perturb(&ideal, sigma_um, &mut rng)?.structure;
                Ok(self.plan.numeric_values(&s, self.process.coupling))
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, _, _) = reduce(&samples)?;
        let peak = mean.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Fit(format!(
                "simulated spectrum at D={duty}, sigma={sigma_um} um is degenerate"
            )));
        }
        Ok(mean.into_iter().map(|v| v / peak).collect())
    }

    pub fn value(&self, duty: f64, sigma_um: f64) -> Result<f64> {
        let sim = self.simulated(duty, sigma_um)?;
        let v: f64 = sim.iter().zip(&self.measured).map(|(a, b)| (a - b) * (a - b)).sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Fit(format!(
                "objective is not finite at D={duty}, sigma={sigma_um} um"
            )))
        }
    }
}

/// Golden-section search on `[a, b]`; returns the best point seen.
fn golden<F>(
    f: F,
    mut a: f64,
    mut b: f64,
    start: (f64, f64),
    iterations: usize,
    evals: &mut usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = start;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    *evals += 2;
    for _ in 0..iterations {
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        *evals += 1;
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Grid search over `(D, sigma)` refined by golden-section sweeps along each axis.
pub fn fit_disorder(
    model: &SellmeierModel,
    measured: &Spectrum,
    base: &GratingSpec,
    process: &ProcessConfig,
    options: &FitOptions,
) -> Result<DisorderFit> {
    options.validate()?;
    base.validate()?;
    process.validate()?;
    let objective = FitObjective::new(
        model,
        measured,
        base,
        process,
        options.realizations,
        options.master_seed,
    )?;

    let ds = FitOptions::axis(options.duty_bounds, options.grid_points.0);
    let ss = FitOptions::axis(options.sigma_bounds_um, options.grid_points.1);
    let nodes: Vec<(f64, f64)> = ds.iter().flat_map(|&d| ss.iter().map(move |&s| (d, s))).collect();
    let values = nodes
        .par_iter()
        .map(|&(d, s)| objective.value(d, s))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = nodes.len();
    let (i, &v) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one grid node");
    let (mut duty, mut sigma, mut best) = (nodes[i].0, nodes[i].1, v);

    let hd = FitOptions::step(options.duty_bounds, options.grid_points.0);
    let hs = FitOptions::step(options.sigma_bounds_um, options.grid_points.1);
    for _ in 0..options.sweeps {
        if best == 0.0 {
            break;
        }
        if hd > 0.0 {
            let (a, b) = (
                (duty - hd).max(options.duty_bounds.0),
                (duty + hd).min(options.duty_bounds.1),
            );
            let (x, fx) = golden(
                |d| objective.value(d, sigma),
                a,
                b,
                (duty, best),
                options.golden_iterations,
                &mut evaluations,
            )?;
            duty = x;
            best = fx;
        }
        if hs > 0.0 {
            let (a, b) = (
                (sigma - hs).max(options.sigma_bounds_um.0),
                (sigma + hs).min(options.sigma_bounds_um.1),
            );
            let (x, fx) = golden(
                |s| objective.value(duty, s),
                a,
                b,
                (sigma, best),
                options.golden_iterations,
                &mut evaluations,
            )?;
            sigma = x;
            best = fx;
        }
    }

    Ok(DisorderFit {
        duty_cycle: duty,
        sigma_um: sigma,
        residual: best.sqrt(),
        evaluations,
        realizations: options.realizations,
        master_seed: options.master_seed,
        duty_resolution: hd,
        sigma_resolution_um: hs,
    })
}
