//! Biphoton spectra of type-II parametric down-conversion in periodically,
//! nonideally and randomly poled crystals.

// Negated comparisons are how NaN inputs get rejected here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod analysis;
pub mod dispersion;
pub mod ensemble;
pub mod error;
pub mod grating;
pub mod spectrum;

pub use amplitude::{
    amplitude_analytic, amplitude_numeric, bogoliubov, sinc, spectral_density, BogoliubovCoefficients, ProcessConfig,
};
pub use analysis::{
    anticorrelation, find_nbpm, find_qpm, fit_disorder, gamma_ratios, peak_ratio_prediction, DisorderFit, FitOptions,
    GammaRatios, PeakRatioPrediction, PhaseMatchSolution, QpmSearch, RateTable,
};
pub use dispersion::{idler_wavelength, OpticalAxis, PhaseMismatchSpec, PhaseTerms, SellmeierModel, Sense, Wave};
pub use ensemble::{child_seed, run_ensemble, EnsembleConfig, EnsembleStatistics};
pub use error::{Error, Result};
pub use grating::{build_ideal, perturb, DomainStructure, FourierCoefficient, GratingSpec};
pub use spectrum::{
    compute_spectrum, convolve_resolution, peak_metrics, Method, PeakMetrics, ResolutionKernel, Spectrum, SpectrumMeta,
    SpectrumSource, WavelengthGrid,
};

pub use num_complex::Complex64;
