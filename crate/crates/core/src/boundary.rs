//! Eigenfunctions of the unit square `[0, 1]²` with Dirichlet or Neumann
//! boundary conditions:
//! `Σ a_ξ sin(πξ¹x¹) sin(πξ²x²)` or `Σ a_ξ cos(πξ¹x¹) cos(πξ²x²)`,
//! summed over lattice points modulo coordinate sign changes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arithmetic::{lattice_points, Frequency};
use crate::error::{Error, Result};
use crate::rng;
use crate::trig::TrigSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            other => Err(Error::InvalidParameter(format!(
                "unknown boundary condition '{other}'"
            ))),
        }
    }
}

/// Real amplitudes indexed by class representatives `(|ξ¹|, |ξ²|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAdaptedSpec {
    pub e: u64,
    pub condition: BoundaryCondition,
    pub terms: Vec<(Frequency, f64)>,
}

/// Representatives `(a, b)`, `a, b ≥ 0`, of lattice points on `|ξ|² = E` up to
/// the signs of the coordinates. Dirichlet drops classes with a zero
/// coordinate, whose sine product vanishes identically.
pub fn equivalence_classes(e: u64, condition: BoundaryCondition) -> Vec<Frequency> {
    lattice_points(e)
        .into_iter()
        .filter(|p| p.x >= 0 && p.y >= 0)
        .filter(|p| condition == BoundaryCondition::Neumann || (p.x != 0 && p.y != 0))
        .collect()
}

/// Random Gaussian amplitudes over the classes, normalised to `Σ a² = 1`.
pub fn build_boundary_adapted(
    e: u64,
    condition: BoundaryCondition,
    seed: u64,
) -> Result<BoundaryAdaptedSpec> {
    if lattice_points(e).is_empty() {
        return Err(Error::NotSumOfTwoSquares(e));
    }
    let classes = equivalence_classes(e, condition);
    if classes.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "no {condition:?} eigenfunctions for E = {e}"
        )));
    }
    let mut rng = rng::stream(seed, 1);
    let raw: Vec<f64> = classes
        .iter()
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(BoundaryAdaptedSpec {
        e,
        condition,
        terms: classes
            .into_iter()
            .zip(raw.into_iter().map(|a| a / norm))
            .collect(),
    })
}

impl BoundaryAdaptedSpec {
    /// Frequency radius `√E / 2` of the products `sin(πξ¹x¹)…` in the `e(·)` convention.
    pub fn frequency_radius(&self) -> f64 {
        (self.e as f64).sqrt() / 2.0
    }

    /// Direct evaluation of the product sum.
    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|(p, a)| {
                let (u, v) = (PI * p.x as f64 * x[0], PI * p.y as f64 * x[1]);
                match self.condition {
                    BoundaryCondition::Dirichlet => a * u.sin() * v.sin(),
                    BoundaryCondition::Neumann => a * u.cos() * v.cos(),
                }
            })
            .sum()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (p, a) in &self.terms {
            let (wx, wy) = (PI * p.x as f64, PI * p.y as f64);
            let (u, v) = (wx * x[0], wy * x[1]);
            match self.condition {
                BoundaryCondition::Dirichlet => {
                    g[0] += a * wx * u.cos() * v.sin();
                    g[1] += a * wy * u.sin() * v.cos();
                }
                BoundaryCondition::Neumann => {
                    g[0] -= a * wx * u.sin() * v.cos();
                    g[1] -= a * wy * u.cos() * v.sin();
                }
            }
        }
        g
    }

    /// Exponential form via the product-to-sum identities:
    /// `sin u sin v = −¼ Σ_{σ,τ=±1} στ e((σξ¹x¹ + τξ²x²)/2)` and
    /// `cos u cos v = ¼ Σ_{σ,τ=±1} e((σξ¹x¹ + τξ²x²)/2)`.
    pub fn to_trig(&self) -> TrigSum {
        let mut freqs = Vec::with_capacity(4 * self.terms.len());
        let mut amps = Vec::with_capacity(4 * self.terms.len());
        for (p, a) in &self.terms {
            for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                freqs.push([sx * p.x as f64 / 2.0, sy * p.y as f64 / 2.0]);
                let c = match self.condition {
                    BoundaryCondition::Dirichlet => -0.25 * sx * sy * a,
                    BoundaryCondition::Neumann => 0.25 * a,
                };
                amps.push(Complex64::new(c, 0.0));
            }
        }
        TrigSum::new(freqs, amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_ignore_signs_only() {
        let d = equivalence_classes(25, BoundaryCondition::Dirichlet);
        assert_eq!(d, vec![Frequency::new(4, 3), Frequency::new(3, 4)]);
        let n = equivalence_classes(25, BoundaryCondition::Neumann);
        assert_eq!(n.len(), 4);
        assert!(n.contains(&Frequency::new(5, 0)) && n.contains(&Frequency::new(0, 5)));
    }

    #[test]
    fn dirichlet_vanishes_on_edges() {
        let f = build_boundary_adapted(325, BoundaryCondition::Dirichlet, 3).unwrap();
        for i in 0..25 {
            let t = i as f64 / 24.0;
            for x in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
                assert!(f.value(x).abs() <= 1e-9, "{x:?}");
            }
        }
    }

    #[test]
    fn neumann_normal_derivative_vanishes() {
        let f = build_boundary_adapted(325, BoundaryCondition::Neumann, 5).unwrap();
        let h = 1e-6;
        for i in 0..25 {
            let t = i as f64 / 24.0;
            // one-sided second-order differences at the edges
            let dn = |x: [f64; 2], d: [f64; 2]| {
                let p1 = f.value([x[0] + h * d[0], x[1] + h * d[1]]);
                let p2 = f.value([x[0] + 2.0 * h * d[0], x[1] + 2.0 * h * d[1]]);
                (-3.0 * f.value(x) + 4.0 * p1 - p2) / (2.0 * h)
            };
            assert!(dn([t, 0.0], [0.0, 1.0]).abs() <= 1e-6);
            assert!(dn([t, 1.0], [0.0, -1.0]).abs() <= 1e-6);
            assert!(dn([0.0, t], [1.0, 0.0]).abs() <= 1e-6);
            assert!(dn([1.0, t], [-1.0, 0.0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn exponential_form_matches_products() {
        for cond in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let f = build_boundary_adapted(325, cond, 11).unwrap();
            let t = f.to_trig();
            for x in [[0.13, 0.57], [0.91, 0.02], [0.5, 0.5]] {
                assert!((t.value(x) - f.value(x)).abs() <= 1e-9);
                let (g1, g2) = (t.gradient(x), f.gradient(x));
                assert!((g1[0] - g2[0]).abs() <= 1e-9 && (g1[1] - g2[1]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_spectrum() {
        assert!(matches!(
            build_boundary_adapted(3, BoundaryCondition::Neumann, 0),
            Err(Error::NotSumOfTwoSquares(3))
        ));
        assert!(build_boundary_adapted(4, BoundaryCondition::Dirichlet, 0).is_err());
    }
}
