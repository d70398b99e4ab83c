//! Laplace eigenfunctions on the torus `ℝ²/ℤ²`,
//! `f(x) = Σ_{|ξ|²=E} a_ξ e(⟨x, ξ⟩)` with `a_{−ξ} = ā_ξ` and `Σ|a_ξ|² = 1`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{lattice_points, Frequency};
use crate::error::{Error, Result};
use crate::measure::{Atom, SpectralMeasure};
use crate::rng;
use crate::trig::TrigSum;

const HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;

/// Coefficients are stored aligned with `lattice_points(E)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionSpec {
    e: u64,
    points: Vec<Frequency>,
    coeffs: Vec<Complex64>,
}

impl EigenfunctionSpec {
    /// Validated spec. Frequencies missing from `coeffs` get amplitude zero.
    pub fn new(e: u64, coeffs: impl IntoIterator<Item = (Frequency, Complex64)>) -> Result<Self> {
        Self::build(e, coeffs, true)
    }

    /// Like [`EigenfunctionSpec::new`] but without the unit-norm check, for
    /// fixtures such as `cos(2πx₁) = ½e(x₁) + ½e(−x₁)`.
    pub fn unnormalized(
        e: u64,
        coeffs: impl IntoIterator<Item = (Frequency, Complex64)>,
    ) -> Result<Self> {
        Self::build(e, coeffs, false)
    }

    fn build(
        e: u64,
        coeffs: impl IntoIterator<Item = (Frequency, Complex64)>,
        check_norm: bool,
    ) -> Result<Self> {
        let points = lattice_points(e);
        if points.is_empty() {
            return Err(Error::NotSumOfTwoSquares(e));
        }
        let index: HashMap<Frequency, usize> =
            points.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); points.len()];
        for (xi, a) in coeffs {
            let Some(&i) = index.get(&xi) else {
                return Err(Error::InvalidSpec(format!(
                    "{xi} does not satisfy |ξ|² = {e}"
                )));
            };
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "non-finite coefficient at {xi}"
                )));
            }
            values[i] = a;
        }
        for (i, p) in points.iter().enumerate() {
            let j = index[&-*p];
            if (values[j] - values[i].conj()).norm() > HERMITIAN_TOL {
                return Err(Error::InvalidSpec(format!(
                    "coefficients at {p} and {} are not conjugate",
                    -*p
                )));
            }
        }
        let norm: f64 = values.iter().map(|a| a.norm_sqr()).sum();
        if norm == 0.0 {
            return Err(Error::InvalidSpec("all coefficients vanish".into()));
        }
        if check_norm && (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidSpec(format!(
                "squared coefficient norm {norm} differs from 1"
            )));
        }
        Ok(Self {
            e,
            points,
            coeffs: values,
        })
    }

    pub fn e(&self) -> u64 {
        self.e
    }

    pub fn multiplicity(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Frequency] {
        &self.points
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, xi: Frequency) -> Complex64 {
        self.points
            .iter()
            .position(|p| *p == xi)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn frequency_radius(&self) -> f64 {
        (self.e as f64).sqrt()
    }

    pub fn wavelength(&self) -> f64 {
        1.0 / self.frequency_radius()
    }

    fn complex_sum(&self, x: [f64; 2]) -> Complex64 {
        self.points
            .iter()
            .zip(&self.coeffs)
            .map(|(p, a)| {
                // exact integer frequencies: reduce the phase modulo 1 per coordinate
                let t = (p.x as f64 * x[0]).rem_euclid(1.0) + (p.y as f64 * x[1]).rem_euclid(1.0);
                a * Complex64::from_polar(1.0, TAU * t)
            })
            .sum()
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let z = self.complex_sum(x);
        debug_assert!(z.im.abs() <= 1e-9, "imaginary residue {}", z.im);
        z.re
    }

    pub fn evaluate(&self, points: &[[f64; 2]]) -> Vec<f64> {
        points.iter().map(|&x| self.value(x)).collect()
    }

    /// `∇f(x) = Re Σ 2πi ξ a_ξ e(⟨x, ξ⟩)`.
    pub fn gradient_at(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (p, a) in self.points.iter().zip(&self.coeffs) {
            let t = (p.x as f64 * x[0]).rem_euclid(1.0) + (p.y as f64 * x[1]).rem_euclid(1.0);
            let im = (a * Complex64::from_polar(1.0, TAU * t)).im;
            g[0] -= TAU * p.x as f64 * im;
            g[1] -= TAU * p.y as f64 * im;
        }
        g
    }

    pub fn gradient(&self, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
        points.iter().map(|&x| self.gradient_at(x)).collect()
    }

    /// The same function as a sum over pair representatives, `Re Σ 2a_ξ e(⟨x, ξ⟩)`.
    pub fn to_trig(&self) -> TrigSum {
        let (freqs, amps) = self
            .points
            .iter()
            .zip(&self.coeffs)
            .filter(|(p, a)| p.is_pair_representative() && a.norm_sqr() > 0.0)
            .map(|(p, a)| (p.as_f64(), 2.0 * a))
            .unzip();
        TrigSum::new(freqs, amps)
    }

    /// `Σ |a_ξ|² δ_{ξ/√E} / Σ |a_ξ|²`, dropping frequencies with zero amplitude.
    pub fn spectral_measure(&self) -> SpectralMeasure {
        let total: f64 = self.coeffs.iter().map(|a| a.norm_sqr()).sum();
        let atoms = self
            .points
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(p, a)| Atom {
                angle: p.angle(),
                mass: a.norm_sqr() / total,
            })
            .collect();
        SpectralMeasure::atomic(atoms).expect("validated spec yields a valid measure")
    }

    /// `N · max |a_ξ|²`; 1 for equimodular coefficients.
    pub fn flatness_index(&self) -> f64 {
        let max = self.coeffs.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        self.points.len() as f64 * max
    }

    /// `F(y) = f(center + R y / √E)`.
    pub fn restrict(&self, center: [f64; 2], r: f64) -> RestrictedField<'_> {
        RestrictedField {
            spec: self,
            center,
            scale: r / self.frequency_radius(),
        }
    }

    /// Text record: first line `E`, then one `xi_x xi_y re im` line per
    /// frequency. Floats use the shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.e);
        for (p, a) in self.points.iter().zip(&self.coeffs) {
            writeln!(s, "{} {} {:?} {:?}", p.x, p.y, a.re, a.im).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let e: u64 = lines
            .next()
            .ok_or_else(|| Error::Parse("empty spec".into()))?
            .parse()
            .map_err(|err| Error::Parse(format!("bad eigenvalue: {err}")))?;
        let mut coeffs = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("expected 4 fields in '{line}'")));
            }
            let int = |s: &str| {
                s.parse::<i64>()
                    .map_err(|err| Error::Parse(format!("'{s}': {err}")))
            };
            let float = |s: &str| {
                s.parse::<f64>()
                    .map_err(|err| Error::Parse(format!("'{s}': {err}")))
            };
            coeffs.push((
                Frequency::new(int(fields[0])?, int(fields[1])?),
                Complex64::new(float(fields[2])?, float(fields[3])?),
            ));
        }
        Self::new(e, coeffs)
    }
}

/// Planck-scale restriction `y ↦ f(center + R y / √E)`.
#[derive(Clone, Copy, Debug)]
pub struct RestrictedField<'a> {
    spec: &'a EigenfunctionSpec,
    center: [f64; 2],
    scale: f64,
}

impl RestrictedField<'_> {
    pub fn torus_point(&self, y: [f64; 2]) -> [f64; 2] {
        [
            self.center[0] + self.scale * y[0],
            self.center[1] + self.scale * y[1],
        ]
    }

    pub fn value(&self, y: [f64; 2]) -> f64 {
        self.spec.value(self.torus_point(y))
    }

    pub fn gradient(&self, y: [f64; 2]) -> [f64; 2] {
        let g = self.spec.gradient_at(self.torus_point(y));
        [self.scale * g[0], self.scale * g[1]]
    }
}

/// Equimodular coefficients `|a_ξ| = N^{−1/2}` with independent uniform
/// phases on pair representatives and conjugates on their negatives.
pub fn build_flat_random(e: u64, seed: u64) -> Result<EigenfunctionSpec> {
    let points = lattice_points(e);
    if points.is_empty() {
        return Err(Error::NotSumOfTwoSquares(e));
    }
    let modulus = 1.0 / (points.len() as f64).sqrt();
    let mut rng = rng::stream(seed, 0);
    let mut coeffs = Vec::with_capacity(points.len());
    for p in points.iter().filter(|p| p.is_pair_representative()) {
        let a = Complex64::from_polar(modulus, rng.gen_range(0.0..TAU));
        coeffs.push((*p, a));
        coeffs.push((-*p, a.conj()));
    }
    renormalized(e, coeffs)
}

/// Rescales to unit norm before validation, absorbing rounding in `Σ|a|²`.
pub(crate) fn renormalized(
    e: u64,
    mut coeffs: Vec<(Frequency, Complex64)>,
) -> Result<EigenfunctionSpec> {
    let norm: f64 = coeffs.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidSpec("all coefficients vanish".into()));
    }
    for (_, a) in &mut coeffs {
        *a /= norm;
    }
    EigenfunctionSpec::new(e, coeffs)
}

/// Spec with the given amplitudes on pair representatives (conjugates added),
/// normalised to unit norm.
pub fn from_representatives(
    e: u64,
    reps: impl IntoIterator<Item = (Frequency, Complex64)>,
) -> Result<EigenfunctionSpec> {
    let mut coeffs = Vec::new();
    for (p, a) in reps {
        if !p.is_pair_representative() {
            return Err(Error::InvalidSpec(format!(
                "{p} is not a pair representative"
            )));
        }
        coeffs.push((p, a));
        coeffs.push((-p, a.conj()));
    }
    renormalized(e, coeffs)
}

/// Angle of a lattice point reduced to `[0, π)`, identifying antipodes.
pub fn pair_angle(p: Frequency) -> f64 {
    p.angle().rem_euclid(PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `cos(2πx₁)`.
    fn cosine() -> EigenfunctionSpec {
        EigenfunctionSpec::unnormalized(
            1,
            [
                (Frequency::new(1, 0), Complex64::new(0.5, 0.0)),
                (Frequency::new(-1, 0), Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap()
    }

    fn half_cos() -> EigenfunctionSpec {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        EigenfunctionSpec::new(
            1,
            [
                (Frequency::new(1, 0), Complex64::new(s, 0.0)),
                (Frequency::new(-1, 0), Complex64::new(s, 0.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn flat_random_examples() {
        let f = build_flat_random(1, 0).unwrap();
        assert_eq!(f.coefficients().len(), 4);
        assert!(f
            .coefficients()
            .iter()
            .all(|a| (a.norm() - 0.5).abs() < 1e-15));
        assert_eq!(build_flat_random(5, 3).unwrap().flatness_index(), 1.0);
        let f = build_flat_random(5525, 42).unwrap();
        let s: f64 = f.coefficients().iter().map(|a| a.norm_sqr()).sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert!(matches!(
            build_flat_random(3, 0),
            Err(Error::NotSumOfTwoSquares(3))
        ));
        assert_eq!(
            build_flat_random(65, 9).unwrap(),
            build_flat_random(65, 9).unwrap()
        );
    }

    #[test]
    fn cosine_values_and_gradients() {
        let f = cosine();
        assert!((f.value([0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!(f.value([0.25, 0.0]).abs() < 1e-15);
        let g = f.gradient_at([0.0, 0.0]);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        let g = f.gradient_at([0.25, 0.0]);
        assert!((g[0] + TAU).abs() < 1e-12 && g[1].abs() < 1e-15);
    }

    #[test]
    fn spectral_measure_and_flatness() {
        let m = half_cos().spectral_measure();
        let SpectralMeasure::Atomic { atoms } = m else {
            panic!()
        };
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].angle, 0.0);
        assert_eq!(atoms[1].angle, PI);
        assert!(atoms.iter().all(|a| (a.mass - 0.5).abs() < 1e-15));
        let SpectralMeasure::Atomic { atoms } =
            build_flat_random(25, 1).unwrap().spectral_measure()
        else {
            panic!()
        };
        assert_eq!(atoms.len(), 12);
        assert!(atoms.iter().all(|a| (a.mass - 1.0 / 12.0).abs() < 1e-15));
        let single =
            from_representatives(25, [(Frequency::new(3, 4), Complex64::new(1.0, 0.0))]).unwrap();
        assert!((single.flatness_index() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let off = EigenfunctionSpec::new(5, [(Frequency::new(1, 1), Complex64::new(1.0, 0.0))]);
        assert!(matches!(off, Err(Error::InvalidSpec(_))));
        let zero = EigenfunctionSpec::new(5, std::iter::empty());
        assert!(matches!(zero, Err(Error::InvalidSpec(_))));
        let not_hermitian = EigenfunctionSpec::new(
            1,
            [
                (Frequency::new(1, 0), Complex64::new(0.0, 0.5f64.sqrt())),
                (Frequency::new(-1, 0), Complex64::new(0.0, 0.5f64.sqrt())),
            ],
        );
        assert!(matches!(not_hermitian, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn restriction() {
        let f = build_flat_random(65, 4).unwrap();
        let c = [0.3, 0.8];
        let r = f.restrict(c, 6.0);
        assert_eq!(r.value([0.0, 0.0]), f.value(c));
        let y = [0.4, -0.7];
        let x = [
            c[0] + 6.0 * y[0] / 65f64.sqrt(),
            c[1] + 6.0 * y[1] / 65f64.sqrt(),
        ];
        assert!((r.value(y) - f.value(x)).abs() <= 1e-12);
        let cos = cosine();
        let rc = cos.restrict([0.0, 0.0], 1.0);
        for t in [0.0, 0.1, 0.37] {
            assert!((rc.value([t, 0.2]) - (TAU * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let f = build_flat_random(5525, 42).unwrap();
        let g = EigenfunctionSpec::from_text(&f.to_text()).unwrap();
        assert_eq!(f, g);
        assert!(EigenfunctionSpec::from_text("5\n1 2 0.5").is_err());
    }

    #[test]
    fn trig_form_agrees() {
        let f = build_flat_random(325, 8).unwrap();
        let t = f.to_trig();
        for x in [[0.1, 0.2], [0.77, 0.41], [-0.3, 1.9]] {
            assert!((t.value(x) - f.value(x)).abs() < 1e-11);
        }
    }
}
