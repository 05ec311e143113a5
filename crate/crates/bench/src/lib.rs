//! Fixtures shared by the benchmarks.

use qpm_core::*;

pub const LENGTH_UM: f64 = 11000.0;

pub fn backward_532() -> ProcessConfig {
    ProcessConfig::new(PhaseMismatchSpec::type_ii(0.532, Sense::Backward))
}

pub fn forward_405() -> ProcessConfig {
    ProcessConfig::new(PhaseMismatchSpec::type_ii(0.405, Sense::Forward))
}

/// Grating II of the backward 532 nm scenario.
pub fn backward_grating(duty: f64) -> GratingSpec {
    GratingSpec::new(2.132, duty, LENGTH_UM)
}

/// `points` samples spanning 0.4 nm around the backward QPM line.
pub fn backward_grid(points: usize) -> WavelengthGrid {
    let model = SellmeierModel::default();
    let root = find_qpm(&model, 2.132, &backward_532(), (1.0, 1.1), 1..=15)
        .expect("backward QPM root")
        .solution
        .signal_um;
    WavelengthGrid::centered(root, 0.0004, points).expect("grid")
}
