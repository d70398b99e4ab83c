//! Symmetric probability measures on the unit circle and their covariance
//! kernels.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::bessel::j0;
use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-9;

/// A point mass at `angle ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub angle: f64,
    pub mass: f64,
}

impl Atom {
    pub fn direction(&self) -> [f64; 2] {
        [self.angle.cos(), self.angle.sin()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralMeasure {
    Atomic { atoms: Vec<Atom> },
    Lebesgue,
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl SpectralMeasure {
    /// Validated atomic measure; atoms are sorted by angle.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| Atom {
                angle: wrap_angle(a.angle),
                mass: a.mass,
            })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidSpec("atomic measure without atoms".into()));
        }
        if let Some(a) = atoms
            .iter()
            .find(|a| !(a.mass > 0.0) || !a.angle.is_finite())
        {
            return Err(Error::InvalidSpec(format!("invalid atom {a:?}")));
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidSpec(format!(
                "total mass {total} differs from 1"
            )));
        }
        for a in &atoms {
            let opposite = wrap_angle(a.angle + PI);
            let mirrored = atoms.iter().any(|b| {
                angle_dist(b.angle, opposite) <= ANGLE_TOL && (b.mass - a.mass).abs() <= MASS_TOL
            });
            if !mirrored {
                return Err(Error::InvalidSpec(format!(
                    "atom at angle {} has no antipodal partner of equal mass",
                    a.angle
                )));
            }
        }
        atoms.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        Ok(Self::Atomic { atoms })
    }

    /// Four equal atoms on the coordinate axes.
    pub fn nu() -> Self {
        Self::Atomic {
            atoms: (0..4)
                .map(|k| Atom {
                    angle: k as f64 * FRAC_PI_2,
                    mass: 0.25,
                })
                .collect(),
        }
    }

    /// Four equal atoms on the diagonals.
    pub fn nu_tilde() -> Self {
        Self::Atomic {
            atoms: (0..4)
                .map(|k| Atom {
                    angle: k as f64 * FRAC_PI_2 + FRAC_PI_4,
                    mass: 0.25,
                })
                .collect(),
        }
    }

    pub fn lebesgue() -> Self {
        Self::Lebesgue
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Lebesgue => "lebesgue",
            Self::Atomic { .. } if *self == Self::nu() => "nu",
            Self::Atomic { .. } if *self == Self::nu_tilde() => "nu_tilde",
            Self::Atomic { .. } => "atomic",
        }
    }

    /// Atoms of the measure; Lebesgue is split into `2K` equal atoms at `kπ/K`.
    pub fn discretize(&self, k: usize) -> Vec<Atom> {
        match self {
            Self::Atomic { atoms } => atoms.clone(),
            Self::Lebesgue => (0..2 * k)
                .map(|i| Atom {
                    angle: i as f64 * PI / k as f64,
                    mass: 1.0 / (2 * k) as f64,
                })
                .collect(),
        }
    }

    /// One representative per antipodal pair (angle in `[0, π)`), with the
    /// mass of a single atom of the pair.
    pub fn pairs(&self, k: usize) -> Vec<Atom> {
        let atoms = self.discretize(k);
        let mut used = vec![false; atoms.len()];
        let mut reps = Vec::with_capacity(atoms.len() / 2);
        for i in 0..atoms.len() {
            if used[i] {
                continue;
            }
            let opposite = wrap_angle(atoms[i].angle + PI);
            let partner = (0..atoms.len())
                .filter(|&j| j != i && !used[j])
                .min_by(|&a, &b| {
                    angle_dist(atoms[a].angle, opposite)
                        .total_cmp(&angle_dist(atoms[b].angle, opposite))
                })
                .expect("antipodal symmetry guarantees a partner");
            used[i] = true;
            used[partner] = true;
            reps.push(if atoms[i].angle <= atoms[partner].angle {
                atoms[i]
            } else {
                atoms[partner]
            });
        }
        reps.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        reps
    }

    /// Total mass of the half-open angular interval `[lo, hi)`, `lo ≤ hi`,
    /// with angles read modulo `2π`. Atomic measures only.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Lebesgue => ((hi - lo) / TAU).clamp(0.0, 1.0),
            Self::Atomic { atoms } => atoms
                .iter()
                .filter(|a| (a.angle - lo).rem_euclid(TAU) < hi - lo)
                .map(|a| a.mass)
                .sum(),
        }
    }

    /// `E[F(x) F(x + lag)] = ∫ e(⟨lag, λ⟩) dμ(λ)`.
    pub fn covariance(&self, lag: [f64; 2]) -> f64 {
        match self {
            Self::Lebesgue => j0(TAU * (lag[0] * lag[0] + lag[1] * lag[1]).sqrt()),
            Self::Atomic { atoms } => atoms
                .iter()
                .map(|a| {
                    let d = a.direction();
                    a.mass * (TAU * (lag[0] * d[0] + lag[1] * d[1])).cos()
                })
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_measures() {
        let SpectralMeasure::Atomic { atoms } = SpectralMeasure::nu() else {
            panic!()
        };
        let angles: Vec<f64> = atoms.iter().map(|a| a.angle).collect();
        assert_eq!(angles, vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);
        assert!(atoms.iter().all(|a| a.mass == 0.25));
        let SpectralMeasure::Atomic { atoms } = SpectralMeasure::nu_tilde() else {
            panic!()
        };
        for (k, a) in atoms.iter().enumerate() {
            assert!((a.angle - (k as f64 * FRAC_PI_2 + FRAC_PI_4)).abs() < 1e-15);
        }
        let leb = SpectralMeasure::lebesgue().discretize(64);
        assert_eq!(leb.len(), 128);
        assert!(leb.iter().all(|a| a.mass == 1.0 / 128.0));
        assert_eq!(SpectralMeasure::lebesgue().pairs(64).len(), 64);
        assert_eq!(SpectralMeasure::nu().pairs(1).len(), 2);
        assert_eq!(SpectralMeasure::nu().label(), "nu");
        assert_eq!(SpectralMeasure::nu_tilde().label(), "nu_tilde");
    }

    #[test]
    fn covariance_examples() {
        for m in [
            SpectralMeasure::nu(),
            SpectralMeasure::nu_tilde(),
            SpectralMeasure::Lebesgue,
        ] {
            assert!((m.covariance([0.0, 0.0]) - 1.0).abs() < 1e-15);
            let lag = [0.37, -0.21];
            assert_eq!(m.covariance(lag), m.covariance([-lag[0], -lag[1]]));
        }
        assert!(SpectralMeasure::nu().covariance([0.5, 0.0]).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_covariance_matches_circle_average() {
        for r in [0.1, 0.4, 1.3, 3.7] {
            let n = 20_000;
            let avg: f64 = (0..n)
                .map(|i| (TAU * r * (TAU * (i as f64 + 0.5) / n as f64).cos()).cos())
                .sum::<f64>()
                / n as f64;
            let c = SpectralMeasure::Lebesgue.covariance([r, 0.0]);
            assert!((c - avg).abs() < 1e-10, "r = {r}");
        }
    }

    #[test]
    fn validation() {
        assert!(SpectralMeasure::atomic(vec![Atom {
            angle: 0.0,
            mass: 1.0
        }])
        .is_err());
        assert!(SpectralMeasure::atomic(vec![
            Atom {
                angle: 0.3,
                mass: 0.5
            },
            Atom {
                angle: 0.3 + PI,
                mass: 0.5
            }
        ])
        .is_ok());
        assert!(SpectralMeasure::atomic(vec![
            Atom {
                angle: 0.3,
                mass: 0.4
            },
            Atom {
                angle: 0.3 + PI,
                mass: 0.4
            }
        ])
        .is_err());
    }
}
