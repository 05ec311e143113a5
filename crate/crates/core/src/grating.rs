//! Signed domain structures realizing the normalized nonlinear profile.
//!
//! A structure is a list of boundary positions `0 = z_0 < z_1 < ... < z_N = L`
//! with the sign of the nonlinear coefficient alternating from domain to
//! domain. The ideal grating starts with a positive domain of length `D * period`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Minimum domain length enforced after perturbation, in um (1 nm).
pub const MIN_DOMAIN_UM: f64 = 1e-3;

/// Boundaries closer than this to the end face are dropped when building.
const END_FACE_EPS_UM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingSpec {
    pub period_um: f64,
    pub duty_cycle: f64,
    pub length_um: f64,
    #[serde(default)]
    pub sigma_um: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GratingSpec {
    pub fn new(period_um: f64, duty_cycle: f64, length_um: f64) -> Self {
        Self {
            period_um,
            duty_cycle,
            length_um,
            sigma_um: 0.0,
            seed: 0,
        }
    }

    pub fn with_disorder(mut self, sigma_um: f64, seed: u64) -> Self {
        self.sigma_um = sigma_um;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_um > 0.0 && self.period_um.is_finite()) {
            return Err(param(format!("period must be positive, got {} um", self.period_um)));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(param(format!("duty cycle must lie in (0, 1), got {}", self.duty_cycle)));
        }
        if !(self.length_um >= self.period_um && self.length_um.is_finite()) {
            return Err(param(format!(
                "crystal length {} um must be at least one period ({} um)",
                self.length_um, self.period_um
            )));
        }
        if !(self.sigma_um >= 0.0 && self.sigma_um.is_finite()) {
            return Err(param(format!("sigma must be non-negative, got {} um", self.sigma_um)));
        }
        Ok(())
    }

    pub fn full_periods(&self) -> u64 {
        (self.length_um / self.period_um).floor() as u64
    }
}

/// One domain of a structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub start_um: f64,
    pub end_um: f64,
    pub sign: f64,
}

impl Domain {
    pub fn length_um(&self) -> f64 {
        self.end_um - self.start_um
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainStructure {
    boundaries: Vec<f64>,
    initial_sign: i8,
}

impl DomainStructure {
    pub fn new(boundaries: Vec<f64>, initial_sign: i8) -> Result<Self> {
        if initial_sign != 1 && initial_sign != -1 {
            return Err(param(format!("initial sign must be +1 or -1, got {initial_sign}")));
        }
        if boundaries.len() < 2 {
            return Err(param("a structure needs at least the two end faces"));
        }
        if boundaries[0] != 0.0 {
            return Err(param(format!("first boundary must be 0, got {}", boundaries[0])));
        }
        for (i, w) in boundaries.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(param(format!(
                    "boundaries must be strictly increasing: z[{}] = {} then z[{}] = {}",
                    i,
                    w[0],
                    i + 1,
                    w[1]
                )));
            }
        }
        Ok(Self {
            boundaries,
            initial_sign,
        })
    }

    /// A single domain of the given sign covering `[0, length]`.
    pub fn single_domain(length_um: f64, sign: i8) -> Result<Self> {
        Self::new(vec![0.0, length_um], sign)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn initial_sign(&self) -> i8 {
        self.initial_sign
    }

    pub fn length_um(&self) -> f64 {
        *self.boundaries.last().expect("validated non-empty")
    }

    pub fn domain_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn domains(&self) -> impl ExactSizeIterator<Item = Domain> + '_ {
        let s0 = f64::from(self.initial_sign);
        self.boundaries.windows(2).enumerate().map(move |(j, w)| Domain {
            start_um: w[0],
            end_um: w[1],
            sign: if j % 2 == 0 { s0 } else { -s0 },
        })
    }

    /// The same boundaries with every sign inverted.
    pub fn flipped(&self) -> Self {
        Self {
            boundaries: self.boundaries.clone(),
            initial_sign: -self.initial_sign,
        }
    }

    /// Writes `# initial_sign=..`, `# length_um=..` and one boundary per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# initial_sign={}", self.initial_sign)?;
        writeln!(out, "# length_um={}", self.length_um())?;
        writeln!(out, "boundary_position_um")?;
        for z in &self.boundaries {
            writeln!(out, "{z:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut initial_sign = None;
        let mut length = None;
        let mut saw_header = false;
        let mut boundaries = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    match k.trim() {
                        "initial_sign" => {
                            initial_sign = Some(
                                v.trim()
                                    .parse::<i8>()
                                    .map_err(|e| Error::Format(format!("line {}: initial_sign: {e}", lineno + 1)))?,
                            )
                        }
                        "length_um" => {
                            length = Some(
                                v.trim()
                                    .parse::<f64>()
                                    .map_err(|e| Error::Format(format!("line {}: length_um: {e}", lineno + 1)))?,
                            )
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if line != "boundary_position_um" {
                    return Err(Error::Format(format!(
                        "line {}: expected header 'boundary_position_um', found '{line}'",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let z = line
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            boundaries.push(z);
        }
        let initial_sign = initial_sign.ok_or_else(|| Error::Format("missing '# initial_sign=' header".into()))?;
        let s = Self::new(boundaries, initial_sign)?;
        if let Some(l) = length {
            if (l - s.length_um()).abs() > 1e-9 * l.abs().max(1.0) {
                return Err(Error::Format(format!(
                    "header length_um={l} disagrees with last boundary {}",
                    s.length_um()
                )));
            }
        }
        Ok(s)
    }
}

/// Real Fourier coefficient of the zero-phase +/-1 square wave with duty
/// cycle `duty`: `2 sin(pi m D) / (pi m)` for `m != 0` and `2D - 1` for `m = 0`.
pub fn fourier_coefficient(order: i64, duty: f64) -> f64 {
    if order == 0 {
        2.0 * duty - 1.0
    } else {
        let m = order as f64;
        2.0 * (PI * m * duty).sin() / (PI * m)
    }
}

/// `K_m = 2 pi m / period` in rad/um.
pub fn grating_vector(order: i64, period_um: f64) -> f64 {
    2.0 * PI * order as f64 / period_um
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCoefficient {
    pub order: i64,
    /// Coefficient of `exp(i K_m z)` for a grating whose first positive
    /// domain starts at `z = 0`.
    pub value: Complex64,
    pub grating_vector: f64,
}

impl FourierCoefficient {
    pub fn of(order: i64, spec: &GratingSpec) -> Self {
        let k = grating_vector(order, spec.period_um);
        let c = fourier_coefficient(order, spec.duty_cycle);
        // The built structure is the zero-phase wave shifted by D*period/2.
        let shift = Complex64::from_polar(1.0, -k * spec.duty_cycle * spec.period_um / 2.0);
        Self {
            order,
            value: shift * c,
            grating_vector: k,
        }
    }
}

/// Ideal periodic structure, truncated at the end face.
pub fn build_ideal(spec: &GratingSpec) -> Result<DomainStructure> {
    spec.validate()?;
    let high = spec.duty_cycle * spec.period_um;
    let limit = spec.length_um - END_FACE_EPS_UM;
    let mut boundaries = Vec::with_capacity(2 * spec.full_periods() as usize + 3);
    boundaries.push(0.0);
    let mut p = 0u64;
    loop {
        let start = p as f64 * spec.period_um;
        if p > 0 {
            if start >= limit {
                break;
            }
            boundaries.push(start);
        }
        let mid = start + high;
        if mid >= limit {
            break;
        }
        boundaries.push(mid);
        p += 1;
    }
    boundaries.push(spec.length_um);
    DomainStructure::new(boundaries, 1)
}

/// A perturbed structure together with the displacement applied to each
/// interior boundary after collision repair.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub structure: DomainStructure,
    pub displacements: Vec<f64>,
}

/// Displaces every interior boundary by an independent `N(0, sigma^2)` draw.
///
/// Boundaries are processed left to right and clamped to
/// `[previous + 1 nm, next ideal + 5 sigma]`; the upper bound is further
/// limited so the remaining boundaries still fit before the end face.
pub fn perturb<R: Rng + ?Sized>(structure: &DomainStructure, sigma_um: f64, rng: &mut R) -> Result<Perturbation> {
    if !(sigma_um >= 0.0 && sigma_um.is_finite()) {
        return Err(param(format!("sigma must be non-negative, got {sigma_um} um")));
    }
    let ideal = structure.boundaries();
    let n = ideal.len() - 1;
    if sigma_um == 0.0 {
        return Ok(Perturbation {
            structure: structure.clone(),
            displacements: vec![0.0; n.saturating_sub(1)],
        });
    }
    let length = ideal[n];
    let mut out = Vec::with_capacity(ideal.len());
    out.push(0.0);
    let mut displacements = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let draw: f64 = rng.sample(StandardNormal);
        let proposed = ideal[i] + sigma_um * draw;
        let lower = out[i - 1] + MIN_DOMAIN_UM;
        let room = length - (n - i) as f64 * MIN_DOMAIN_UM;
        let upper = (ideal[i + 1] + 5.0 * sigma_um).min(room).max(lower);
        let z = proposed.clamp(lower, upper);
        displacements.push(z - ideal[i]);
        out.push(z);
    }
    out.push(length);
    Ok(Perturbation {
        structure: DomainStructure::new(out, structure.initial_sign())?,
        displacements,
    })
}

/// Fraction of the crystal length with positive sign.
pub fn duty_cycle_estimate(structure: &DomainStructure) -> f64 {
    let positive: f64 = structure
        .domains()
        .filter(|d| d.sign > 0.0)
        .map(|d| d.length_um())
        .sum();
    positive / structure.length_um()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lengths(s: &DomainStructure) -> Vec<f64> {
        s.domains().map(|d| d.length_um()).collect()
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(fourier_coefficient(0, 0.5), 0.0);
        assert!((fourier_coefficient(1, 0.5) - 2.0 / PI).abs() < 1e-15);
        assert!(fourier_coefficient(2, 0.5).abs() < 1e-15);
        assert!((fourier_coefficient(1, 0.8) - 0.374_19).abs() < 1e-5);
        assert!((fourier_coefficient(-3, 0.3) - fourier_coefficient(3, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn grating_vectors() {
        assert!((grating_vector(1, 2.132) - 2.947_04).abs() < 1e-4);
        assert_eq!(grating_vector(0, 2.132), 0.0);
        assert_eq!(grating_vector(-1, 2.132), -grating_vector(1, 2.132));
    }

    #[test]
    fn parseval() {
        for d in [0.5, 0.6, 0.8] {
            let mut sum = fourier_coefficient(0, d).powi(2);
            for m in 1..=10_000i64 {
                sum += 2.0 * fourier_coefficient(m, d).powi(2);
            }
            assert!((sum - 1.0).abs() < 1e-4, "D={d}: {sum}");
        }
    }

    // Exact piecewise integral of the first period against exp(-i K z).
    fn first_period_integral(spec: &GratingSpec, order: i64) -> Complex64 {
        let s = build_ideal(spec).unwrap();
        let k = grating_vector(order, spec.period_um);
        let mut acc = Complex64::new(0.0, 0.0);
        for d in s.domains().take(2) {
            let piece = if k == 0.0 {
                Complex64::new(d.length_um(), 0.0)
            } else {
                let e = |z: f64| Complex64::from_polar(1.0, -k * z);
                (e(d.end_um) - e(d.start_um)) / Complex64::new(0.0, -k)
            };
            acc += piece * d.sign;
        }
        acc / spec.period_um
    }

    #[test]
    fn coefficient_matches_period_integral() {
        for d in [0.3, 0.5, 0.6, 0.8] {
            let spec = GratingSpec::new(2.132, d, 100.0);
            for m in -7..=7 {
                let c = FourierCoefficient::of(m, &spec);
                let integral = first_period_integral(&spec, m);
                assert!((c.value - integral).norm() < 1e-10, "D={d} m={m}");
                assert!((c.value.norm() - fourier_coefficient(m, d).abs()).abs() < 1e-12);
                assert!(c.value.norm() <= 1.0);
            }
        }
    }

    #[test]
    fn ideal_small_cases() {
        let s = build_ideal(&GratingSpec::new(2.0, 0.5, 10.0)).unwrap();
        assert_eq!(s.domain_count(), 10);
        assert!(lengths(&s).iter().all(|l| (l - 1.0).abs() < 1e-12));

        let s = build_ideal(&GratingSpec::new(2.0, 0.25, 2.0)).unwrap();
        assert_eq!(lengths(&s).len(), 2);
        assert!((lengths(&s)[0] - 0.5).abs() < 1e-12);
        assert!((lengths(&s)[1] - 1.5).abs() < 1e-12);
        let signs: Vec<f64> = s.domains().map(|d| d.sign).collect();
        assert_eq!(signs, vec![1.0, -1.0]);
    }

    #[test]
    fn ideal_full_crystal() {
        let spec = GratingSpec::new(2.132, 0.5, 11_000.0);
        assert_eq!(spec.full_periods(), 5159);
        let s = build_ideal(&spec).unwrap();
        let n = s.boundaries().len() - 1;
        let base = 2 * 5159;
        assert!(n >= base && n <= base + 2, "{n}");
        assert!((duty_cycle_estimate(&s) - 0.5).abs() < 1.0 / 5159.0);
        assert_eq!(s.length_um(), 11_000.0);
    }

    #[test]
    fn duty_estimates() {
        let s = build_ideal(&GratingSpec::new(2.132, 0.8, 11_000.0)).unwrap();
        assert!((duty_cycle_estimate(&s) - 0.8).abs() < 1.0 / 5159.0);
        let one = DomainStructure::single_domain(50.0, 1).unwrap();
        assert_eq!(duty_cycle_estimate(&one), 1.0);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = build_ideal(&GratingSpec::new(2.132, 0.6, 500.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = perturb(&s, 0.0, &mut rng).unwrap();
        assert_eq!(p.structure, s);
    }

    #[test]
    fn perturbation_statistics() {
        let s = build_ideal(&GratingSpec::new(2.132, 0.5, 11_000.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = perturb(&s, 0.3, &mut rng).unwrap();
        let d = &p.displacements;
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.29..=0.31).contains(&sd), "{sd}");
        assert_eq!(p.structure.boundaries().len(), s.boundaries().len());
        assert_eq!(p.structure.length_um(), s.length_um());
        assert!(lengths(&p.structure).iter().all(|&l| l >= MIN_DOMAIN_UM * (1.0 - 1e-9)));
    }

    #[test]
    fn perturbation_is_seed_deterministic() {
        let s = build_ideal(&GratingSpec::new(2.112, 0.5, 2000.0)).unwrap();
        let a = perturb(&s, 0.45, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = perturb(&s, 0.45, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
        let c = perturb(&s, 0.45, &mut ChaCha8Rng::seed_from_u64(100)).unwrap();
        assert_ne!(a.structure, c.structure);
    }

    #[test]
    fn perturbed_duty_tends_to_half() {
        let s = build_ideal(&GratingSpec::new(2.132, 0.5, 11_000.0)).unwrap();
        let mean: f64 = (0..20)
            .map(|seed| {
                let p = perturb(&s, 0.3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                duty_cycle_estimate(&p.structure)
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - 0.5).abs() < 2e-3, "{mean}");
    }

    #[test]
    fn heavy_disorder_stays_valid() {
        // sigma comparable to the domain length forces frequent clamping.
        let s = build_ideal(&GratingSpec::new(2.0, 0.1, 200.0)).unwrap();
        let p = perturb(&s, 1.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(DomainStructure::new(p.structure.boundaries().to_vec(), 1).is_ok());
    }

    #[test]
    fn invalid_specs() {
        assert!(GratingSpec::new(0.0, 0.5, 10.0).validate().is_err());
        assert!(GratingSpec::new(2.0, 1.0, 10.0).validate().is_err());
        assert!(GratingSpec::new(2.0, 0.5, 1.0).validate().is_err());
        assert!(GratingSpec::new(2.0, 0.5, 10.0)
            .with_disorder(-0.1, 0)
            .validate()
            .is_err());
        assert!(DomainStructure::new(vec![0.0, 2.0, 1.0, 3.0], 1).is_err());
        assert!(DomainStructure::new(vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = build_ideal(&GratingSpec::new(2.132, 0.6, 50.0)).unwrap();
        let p = perturb(&s, 0.2, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap()
            .structure
            .flipped();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = DomainStructure::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert!(DomainStructure::read_csv("boundary_position_um\n0\n1\n".as_bytes()).is_err());
    }
}
