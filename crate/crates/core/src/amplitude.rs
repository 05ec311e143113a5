//! Low-gain biphoton amplitude `B` and the remaining input-output coefficients.
//!
//! Two independent routes compute `B`:
//!
//! * [`amplitude_analytic`] sums the Fourier harmonics of an unperturbed
//!   grating up to a truncation order, each harmonic contributing a sinc
//!   centred on `dk + K_m = 0`;
//! * [`amplitude_numeric`] integrates `d(z) exp(i dk z)` exactly over an
//!   arbitrary piecewise-constant [`DomainStructure`].
//!
//! Both share the overall phase `exp(i (k_s + k_i) L)`, so for an ideal
//! grating they agree as complex numbers, not only in modulus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{PhaseMismatchSpec, PhaseTerms, SellmeierModel};
use crate::error::{param, Result};
use crate::grating::{DomainStructure, FourierCoefficient, GratingSpec};

/// `sin(x) / x`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub mismatch: PhaseMismatchSpec,
    /// Coupling constant, 1 for spectra in relative units.
    #[serde(default = "unit_coupling")]
    pub coupling: f64,
    /// Coupling of the birefringently phase-matched process when it differs
    /// from the quasi-phase-matched one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_nbpm: Option<f64>,
}

fn unit_coupling() -> f64 {
    1.0
}

impl ProcessConfig {
    pub fn new(mismatch: PhaseMismatchSpec) -> Self {
        Self {
            mismatch,
            coupling: 1.0,
            coupling_nbpm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mismatch.validate()?;
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(param(format!("coupling must be positive, got {}", self.coupling)));
        }
        if let Some(k) = self.coupling_nbpm {
            if !(k > 0.0 && k.is_finite()) {
                return Err(param(format!("coupling_nbpm must be positive, got {k}")));
            }
        }
        Ok(())
    }

    pub fn terms(&self, model: &SellmeierModel, signal_um: f64) -> Result<PhaseTerms> {
        self.mismatch.terms(model, signal_um)
    }
}

fn prefactor(coupling: f64, terms: &PhaseTerms, length_um: f64) -> Complex64 {
    Complex64::i() * coupling * Complex64::from_polar(1.0, (terms.k_signal + terms.k_idler) * length_um)
}

/// `int_0^L d(z) exp(i dk z) dz` over a piecewise-constant structure.
///
/// For `|dk| L >= 1` the integral is summed over boundaries,
/// `(1 / i dk) sum_b (s_left - s_right) exp(i dk z_b)`, one phase per boundary.
/// Closer to `dk = 0` that sum cancels badly, so each domain contributes
/// `len * sinc(dk len / 2) * exp(i dk z_mid)` instead, which tends to the
/// domain length. Both forms are exact.
pub fn profile_integral(structure: &DomainStructure, delta_k: f64) -> Complex64 {
    if (delta_k * structure.length_um()).abs() >= 1.0 {
        boundary_sum(structure, delta_k)
    } else {
        domain_sum(structure, delta_k)
    }
}

fn domain_sum(structure: &DomainStructure, delta_k: f64) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for d in structure.domains() {
        let len = d.length_um();
        let mid = 0.5 * (d.start_um + d.end_um);
        let w = d.sign * len * sinc(0.5 * delta_k * len);
        let (s, c) = (delta_k * mid).sin_cos();
        re += w * c;
        im += w * s;
    }
    Complex64::new(re, im)
}

fn boundary_sum(structure: &DomainStructure, delta_k: f64) -> Complex64 {
    let b = structure.boundaries();
    let n = b.len() - 1;
    let first = f64::from(structure.initial_sign());
    // Signs alternate, so every interior jump is 2 s_left.
    let last = if n % 2 == 1 { first } else { -first };
    let mut re = -first;
    let mut im = 0.0;
    let mut left = first;
    for &z in &b[1..n] {
        let (s, c) = (delta_k * z).sin_cos();
        re += 2.0 * left * c;
        im += 2.0 * left * s;
        left = -left;
    }
    let (s, c) = (delta_k * b[n]).sin_cos();
    re += last * c;
    im += last * s;
    // Divide by i dk.
    Complex64::new(im / delta_k, -re / delta_k)
}

/// Numeric amplitude from precomputed phase terms.
pub fn amplitude_numeric_terms(terms: &PhaseTerms, structure: &DomainStructure, coupling: f64) -> Complex64 {
    prefactor(coupling, terms, structure.length_um()) * profile_integral(structure, terms.delta_k)
}

pub fn amplitude_numeric(
    model: &SellmeierModel,
    signal_um: f64,
    structure: &DomainStructure,
    process: &ProcessConfig,
) -> Result<Complex64> {
    let terms = process.terms(model, signal_um)?;
    Ok(amplitude_numeric_terms(&terms, structure, process.coupling))
}

/// Analytic amplitude from precomputed phase terms, harmonics `|m| <= order`.
pub fn amplitude_analytic_terms(terms: &PhaseTerms, grating: &GratingSpec, coupling: f64, order: usize) -> Complex64 {
    let length = grating.length_um;
    let mut acc = Complex64::new(0.0, 0.0);
    let order = order as i64;
    for m in -order..=order {
        let h = FourierCoefficient::of(m, grating);
        let half = 0.5 * (terms.delta_k + h.grating_vector) * length;
        acc += h.value * Complex64::from_polar(length * sinc(half), half);
    }
    prefactor(coupling, terms, length) * acc
}

/// Fourier-series amplitude of the unperturbed grating described by `grating`.
pub fn amplitude_analytic(
    model: &SellmeierModel,
    signal_um: f64,
    grating: &GratingSpec,
    process: &ProcessConfig,
    order: usize,
) -> Result<Complex64> {
    check_analytic(grating, order)?;
    let terms = process.terms(model, signal_um)?;
    Ok(amplitude_analytic_terms(&terms, grating, process.coupling, order))
}

pub(crate) fn check_analytic(grating: &GratingSpec, order: usize) -> Result<()> {
    grating.validate()?;
    if order < 1 {
        return Err(param("truncation order must be at least 1"));
    }
    if grating.sigma_um != 0.0 {
        return Err(param(format!(
            "the analytic amplitude models the unperturbed grating; sigma is {} um",
            grating.sigma_um
        )));
    }
    Ok(())
}

/// Input-output coefficients of the low-gain solution at one signal frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovCoefficients {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d_out: Complex64,
}

impl BogoliubovCoefficients {
    pub fn from_terms(terms: &PhaseTerms, b: Complex64, epsilon: f64, length_um: f64) -> Self {
        let a = Complex64::from_polar(1.0, terms.k_signal * length_um);
        let d_out = Complex64::from_polar(1.0, -epsilon * terms.k_idler * length_um);
        let c = b.conj() * Complex64::from_polar(1.0, (terms.k_signal + (epsilon - 1.0) * terms.k_idler) * length_um);
        Self { a, b, c, d_out }
    }
}

pub fn bogoliubov(
    model: &SellmeierModel,
    signal_um: f64,
    structure: &DomainStructure,
    process: &ProcessConfig,
) -> Result<BogoliubovCoefficients> {
    let terms = process.terms(model, signal_um)?;
    let b = amplitude_numeric_terms(&terms, structure, process.coupling);
    Ok(BogoliubovCoefficients::from_terms(
        &terms,
        b,
        process.mismatch.sense.epsilon(),
        structure.length_um(),
    ))
}

/// `S = |B|^2 / 2 pi`.
pub fn spectral_density(b: Complex64) -> f64 {
    b.norm_sqr() / (2.0 * std::f64::consts::PI)
}
