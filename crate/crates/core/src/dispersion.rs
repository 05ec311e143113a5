//! Refractive indices, wavevectors and the collinear phase mismatch.
//!
//! Lengths are in micrometres and wavevectors in rad/um throughout. All
//! wavelengths are vacuum wavelengths.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Crystallographic polarization axis of a wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpticalAxis {
    Y,
    Z,
}

impl fmt::Display for OpticalAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpticalAxis::Y => f.write_str("y"),
            OpticalAxis::Z => f.write_str("z"),
        }
    }
}

/// Functional form of a Sellmeier equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellmeierForm {
    /// `n^2 = a + b / (1 - c / l^2) - d l^2`
    PoleRatio,
    /// `n^2 = a + b / (l^2 - c) - d l^2`
    PoleShift,
}

/// Coefficients for one axis. `c` is in um^2, `d` in um^-2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// A published dispersion data set for the y and z axes of a KTP-family crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierModel {
    pub name: String,
    pub provenance: String,
    pub form: SellmeierForm,
    pub y: AxisCoefficients,
    pub z: AxisCoefficients,
    /// Validity window `[min, max]` in um.
    pub window_um: [f64; 2],
}

impl Default for SellmeierModel {
    fn default() -> Self {
        Self::fan_1987()
    }
}

impl SellmeierModel {
    /// Flux-grown KTP, room temperature. Default data set.
    pub fn fan_1987() -> Self {
        Self {
            name: "fan1987".into(),
            provenance: "T. Y. Fan et al., Appl. Opt. 26, 2390 (1987), flux-grown KTP".into(),
            form: SellmeierForm::PoleRatio,
            y: AxisCoefficients {
                a: 2.19229,
                b: 0.83547,
                c: 0.04970,
                d: 0.01621,
            },
            z: AxisCoefficients {
                a: 2.25411,
                b: 1.06543,
                c: 0.05486,
                d: 0.02140,
            },
            window_um: [0.40, 2.0],
        }
    }

    /// Alternative KTP data set.
    pub fn kato_1991() -> Self {
        Self {
            name: "kato1991".into(),
            provenance: "K. Kato, IEEE J. Quantum Electron. 27, 1137 (1991), KTP".into(),
            form: SellmeierForm::PoleShift,
            y: AxisCoefficients {
                a: 3.0333,
                b: 0.04154,
                c: 0.04547,
                d: 0.01408,
            },
            z: AxisCoefficients {
                a: 3.3134,
                b: 0.05694,
                c: 0.05658,
                d: 0.01682,
            },
            window_um: [0.40, 2.0],
        }
    }

    /// Look up a built-in data set by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "fan1987" => Some(Self::fan_1987()),
            "kato1991" => Some(Self::kato_1991()),
            _ => None,
        }
    }

    /// Checks the window and that every index in it is real and above one.
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.window_um;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(param(format!(
                "Sellmeier window [{lo}, {hi}] um must satisfy 0 < min < max"
            )));
        }
        for axis in [OpticalAxis::Y, OpticalAxis::Z] {
            let c = self.coefficients(axis);
            if ![c.a, c.b, c.c, c.d].iter().all(|v| v.is_finite()) {
                return Err(param(format!("Sellmeier coefficients for axis {axis} must be finite")));
            }
            // 1000 samples is enough to catch a pole or a sign change inside the window.
            for i in 0..=1000 {
                let l = lo + (hi - lo) * i as f64 / 1000.0;
                let n2 = self.index_squared(axis, l);
                if !(n2.is_finite() && n2 > 1.0) {
                    return Err(param(format!(
                        "Sellmeier set '{}' gives n^2 = {n2} on axis {axis} at {l} um",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn coefficients(&self, axis: OpticalAxis) -> &AxisCoefficients {
        match axis {
            OpticalAxis::Y => &self.y,
            OpticalAxis::Z => &self.z,
        }
    }

    fn index_squared(&self, axis: OpticalAxis, wavelength_um: f64) -> f64 {
        let c = self.coefficients(axis);
        let l2 = wavelength_um * wavelength_um;
        match self.form {
            SellmeierForm::PoleRatio => c.a + c.b / (1.0 - c.c / l2) - c.d * l2,
            SellmeierForm::PoleShift => c.a + c.b / (l2 - c.c) - c.d * l2,
        }
    }

    pub fn check_window(&self, wavelength_um: f64) -> Result<()> {
        let [min_um, max_um] = self.window_um;
        if wavelength_um.is_finite() && wavelength_um >= min_um && wavelength_um <= max_um {
            Ok(())
        } else {
            Err(Error::OutsideWindow {
                wavelength_um,
                min_um,
                max_um,
            })
        }
    }

    /// Refractive index on `axis` at vacuum wavelength `wavelength_um`.
    pub fn refractive_index(&self, axis: OpticalAxis, wavelength_um: f64) -> Result<f64> {
        self.check_window(wavelength_um)?;
        Ok(self.index_squared(axis, wavelength_um).sqrt())
    }

    /// Wavevector `2 pi n / l` in rad/um.
    pub fn wavevector(&self, axis: OpticalAxis, wavelength_um: f64) -> Result<f64> {
        let n = self.refractive_index(axis, wavelength_um)?;
        Ok(wavevector_from_index(n, wavelength_um))
    }
}

pub fn wavevector_from_index(index: f64, wavelength_um: f64) -> f64 {
    2.0 * PI * index / wavelength_um
}

/// Idler wavelength fixed by energy conservation, `1/l_i = 1/l_p - 1/l_s`.
pub fn idler_wavelength(pump_um: f64, signal_um: f64) -> Result<f64> {
    if !(pump_um > 0.0 && signal_um > pump_um && signal_um.is_finite()) {
        return Err(Error::InvalidPair { pump_um, signal_um });
    }
    Ok(pump_um * signal_um / (signal_um - pump_um))
}

/// A monochromatic wave with a polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wave {
    pub wavelength_um: f64,
    pub axis: OpticalAxis,
}

/// Propagation sense of the idler relative to the pump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sense {
    Forward,
    Backward,
}

impl Sense {
    /// The sign `epsilon` in `dk = k_p - k_s - epsilon k_i`.
    pub fn epsilon(self) -> f64 {
        match self {
            Sense::Forward => 1.0,
            Sense::Backward => -1.0,
        }
    }
}

impl TryFrom<i8> for Sense {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sense::Forward),
            -1 => Ok(Sense::Backward),
            other => Err(format!("epsilon must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sense> for i8 {
    fn from(s: Sense) -> i8 {
        match s {
            Sense::Forward => 1,
            Sense::Backward => -1,
        }
    }
}

/// Wavevectors of the three waves and their mismatch at one signal wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTerms {
    pub signal_um: f64,
    pub idler_um: f64,
    pub k_pump: f64,
    pub k_signal: f64,
    pub k_idler: f64,
    pub delta_k: f64,
}

/// Pump, signal/idler polarizations and propagation sense of a type-II process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMismatchSpec {
    pub pump: Wave,
    pub signal_axis: OpticalAxis,
    pub idler_axis: OpticalAxis,
    #[serde(rename = "epsilon")]
    pub sense: Sense,
}

impl PhaseMismatchSpec {
    /// y-polarized pump, z signal, y idler.
    pub fn type_ii(pump_um: f64, sense: Sense) -> Self {
        Self {
            pump: Wave {
                wavelength_um: pump_um,
                axis: OpticalAxis::Y,
            },
            signal_axis: OpticalAxis::Z,
            idler_axis: OpticalAxis::Y,
            sense,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal_axis == self.idler_axis {
            return Err(param("signal and idler axes must differ for a type-II process"));
        }
        if !(self.pump.wavelength_um > 0.0 && self.pump.wavelength_um.is_finite()) {
            return Err(param(format!(
                "pump wavelength must be positive, got {}",
                self.pump.wavelength_um
            )));
        }
        Ok(())
    }

    pub fn terms(&self, model: &SellmeierModel, signal_um: f64) -> Result<PhaseTerms> {
        let idler_um = idler_wavelength(self.pump.wavelength_um, signal_um)?;
        let k_pump = model.wavevector(self.pump.axis, self.pump.wavelength_um)?;
        let k_signal = model.wavevector(self.signal_axis, signal_um)?;
        let k_idler = model.wavevector(self.idler_axis, idler_um)?;
        Ok(PhaseTerms {
            signal_um,
            idler_um,
            k_pump,
            k_signal,
            k_idler,
            delta_k: k_pump - k_signal - self.sense.epsilon() * k_idler,
        })
    }

    /// `dk = k_p - k_s - epsilon k_i` in rad/um.
    pub fn phase_mismatch(&self, model: &SellmeierModel, signal_um: f64) -> Result<f64> {
        Ok(self.terms(model, signal_um)?.delta_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Fan 1987 coefficients evaluated by hand at 30 digits, rounded to f64.
    const NZ_1064: f64 = 1.830_183_571_611_71;
    const NY_1064: f64 = 1.745_786_558_755_902;
    const NY_532: f64 = 1.789_171_430_983_945_6;

    #[test]
    fn golden_indices() {
        let m = SellmeierModel::fan_1987();
        assert!((m.refractive_index(OpticalAxis::Z, 1.064).unwrap() - NZ_1064).abs() < 1e-14);
        assert!((m.refractive_index(OpticalAxis::Y, 1.064).unwrap() - NY_1064).abs() < 1e-14);
        assert!((m.refractive_index(OpticalAxis::Y, 0.532).unwrap() - NY_532).abs() < 1e-14);
    }

    #[test]
    fn normal_dispersion_and_birefringence() {
        let m = SellmeierModel::default();
        let z532 = m.refractive_index(OpticalAxis::Z, 0.532).unwrap();
        let z1064 = m.refractive_index(OpticalAxis::Z, 1.064).unwrap();
        let y1064 = m.refractive_index(OpticalAxis::Y, 1.064).unwrap();
        assert!(z532 > z1064);
        assert!(y1064 < z1064);
    }

    #[test]
    fn outside_window_names_window() {
        let m = SellmeierModel::default();
        let err = m.refractive_index(OpticalAxis::Z, 3.5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.4") && msg.contains("2"), "{msg}");
    }

    #[test]
    fn wavevector_identities() {
        assert!((wavevector_from_index(1.8, 1.064) - 10.629_6).abs() < 1e-3);
        let k1 = wavevector_from_index(1.8, 1.0);
        let k2 = wavevector_from_index(1.8, 2.0);
        assert!((k1 / k2 - 2.0).abs() < 1e-15);
        let m = SellmeierModel::default();
        assert!(m.wavevector(OpticalAxis::Y, 0.532).unwrap() > m.wavevector(OpticalAxis::Z, 1.064).unwrap());
    }

    #[test]
    fn idler_closure() {
        assert!((idler_wavelength(0.532, 1.064).unwrap() - 1.064).abs() < 1e-15);
        let li = idler_wavelength(0.532, 1.038).unwrap();
        assert!((li - 1.0 / (1.0 / 0.532 - 1.0 / 1.038)).abs() < 1e-12);
        assert!((li - 1.0913).abs() < 1e-4);
        let closure = 1.0 / 0.532 - 1.0 / 1.038 - 1.0 / li;
        assert!(closure.abs() < 1e-12 * (1.0 / 0.532));
        assert!(matches!(idler_wavelength(0.532, 0.532), Err(Error::InvalidPair { .. })));
        assert!(matches!(idler_wavelength(0.532, 0.4), Err(Error::InvalidPair { .. })));
    }

    #[test]
    fn backward_mismatch_is_large_and_positive() {
        let m = SellmeierModel::default();
        let spec = PhaseMismatchSpec::type_ii(0.532, Sense::Backward);
        for i in 0..=200 {
            let ls = 0.95 + 0.3 * i as f64 / 200.0;
            assert!(spec.phase_mismatch(&m, ls).unwrap() > 15.0);
        }
    }

    #[test]
    fn forward_mismatch_monotone_near_nbpm() {
        let m = SellmeierModel::default();
        let spec = PhaseMismatchSpec::type_ii(0.532, Sense::Forward);
        let mut prev = spec.phase_mismatch(&m, 1.0).unwrap();
        let mut sign_changes = 0;
        for i in 1..=1000 {
            let ls = 1.0 + i as f64 * 1e-4;
            let dk = spec.phase_mismatch(&m, ls).unwrap();
            assert!(dk > prev, "not increasing at {ls}");
            if dk.signum() != prev.signum() {
                sign_changes += 1;
            }
            prev = dk;
        }
        assert_eq!(sign_changes, 1);
    }

    #[test]
    fn sense_relation() {
        let m = SellmeierModel::default();
        let fwd = PhaseMismatchSpec::type_ii(0.532, Sense::Forward);
        let bwd = PhaseMismatchSpec::type_ii(0.532, Sense::Backward);
        for ls in [0.9, 1.038, 1.064, 1.2] {
            let t = fwd.terms(&m, ls).unwrap();
            let b = bwd.phase_mismatch(&m, ls).unwrap();
            assert!((t.delta_k + 2.0 * t.k_idler - b).abs() < 1e-12);
        }
    }

    #[test]
    fn index_continuous_over_window() {
        let m = SellmeierModel::default();
        for axis in [OpticalAxis::Y, OpticalAxis::Z] {
            let mut prev = m.refractive_index(axis, 0.40).unwrap();
            let mut l = 0.40;
            while l < 2.0 {
                l += 1e-5;
                let n = match m.refractive_index(axis, l) {
                    Ok(n) => n,
                    Err(_) => break,
                };
                assert!((n - prev).abs() < 2e-5, "jump at {l}");
                prev = n;
            }
        }
    }

    #[test]
    fn builtin_sets_validate() {
        SellmeierModel::fan_1987().validate().unwrap();
        SellmeierModel::kato_1991().validate().unwrap();
        let mut bad = SellmeierModel::fan_1987();
        bad.window_um = [0.1, 2.0];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn type_ii_requires_distinct_axes() {
        let mut spec = PhaseMismatchSpec::type_ii(0.532, Sense::Forward);
        spec.validate().unwrap();
        spec.idler_axis = OpticalAxis::Z;
        assert!(spec.validate().is_err());
    }
}
