//! De-randomisation statistics over small balls.
//!
//! The circle of directions is cut into `2K` arcs `I_k` centred at `kπ/K`.
//! For a toral eigenfunction `f` and a base point `x`, the frequencies in each
//! arc are lumped into one coefficient
//! `b_k(x) = μ(I_k)^{−1/2} Σ_{ξ/√E ∈ I_k} a_ξ e(⟨ξ, x⟩)`, and the rescaled
//! restriction `F_x(y) = f(x + R y/√E)` is compared with the approximant
//! `φ_x(y) = Σ_{k heavy} μ(I_k)^{1/2} b_k(x) e(⟨R ζ_k, y⟩)`.
//!
//! When `x` is uniform in a ball `B(s, z)`, the `b_k` behave like independent
//! complex standard Gaussians (subject to `b_{k+K} = b̄_k`). The moment tests
//! here measure how far that holds for a concrete `f`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{spectral_correlations, CorrelationMethod, Frequency, WorkBudget};
use crate::bessel::ball_fourier_factor;
use crate::eigenfunction::EigenfunctionSpec;
use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;
use crate::rng;
use crate::trig::{AnalyticField, TrigSum};

pub const DEFAULT_K: usize = 32;
pub const DEFAULT_MAX_ORDER: u32 = 8;
pub const DEFAULT_R: f64 = 8.0;
pub const MIN_MOMENT_SAMPLES: usize = 10_000;

const CHUNK: usize = 4096;
const MC_STREAM: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerandConfig {
    pub k: usize,
    pub delta: f64,
    pub max_order: u32,
    pub r: f64,
}

impl Default for DerandConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            delta: 1.0 / (DEFAULT_K * DEFAULT_K) as f64,
            max_order: DEFAULT_MAX_ORDER,
            r: DEFAULT_R,
        }
    }
}

/// `2K` half-open arcs `[kπ/K − π/2K, kπ/K + π/2K)`, `k = 0, …, 2K − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcPartition {
    k: usize,
}

impl ArcPartition {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("arc partition needs K ≥ 1".into()));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        2 * self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Angular width `π/K`, i.e. `1/(2K)` of the full turn.
    pub fn width(&self) -> f64 {
        PI / self.k as f64
    }

    pub fn midpoint_angle(&self, i: usize) -> f64 {
        i as f64 * self.width()
    }

    pub fn midpoint(&self, i: usize) -> [f64; 2] {
        let t = self.midpoint_angle(i);
        [t.cos(), t.sin()]
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let m = self.midpoint_angle(i);
        (m - self.width() / 2.0, m + self.width() / 2.0)
    }

    pub fn index_of(&self, angle: f64) -> usize {
        let t = (angle + self.width() / 2.0).rem_euclid(TAU);
        ((t / self.width()).floor() as usize).min(self.len() - 1)
    }

    pub fn antipode(&self, i: usize) -> usize {
        (i + self.k) % self.len()
    }

    /// `μ(I_k)` for every arc.
    pub fn masses(&self, measure: &SpectralMeasure) -> Vec<f64> {
        match measure {
            SpectralMeasure::Lebesgue => vec![1.0 / self.len() as f64; self.len()],
            SpectralMeasure::Atomic { atoms } => {
                let mut m = vec![0.0; self.len()];
                for a in atoms {
                    m[self.index_of(a.angle)] += a.mass;
                }
                m
            }
        }
    }
}

/// Arcs with `μ(I_k) > δ`, in increasing order.
pub fn heavy_arcs(measure: &SpectralMeasure, partition: &ArcPartition, delta: f64) -> Vec<usize> {
    partition
        .masses(measure)
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > delta)
        .map(|(i, _)| i)
        .collect()
}

/// The frequencies of `f` grouped by arc, restricted to a set of arcs.
#[derive(Clone, Debug)]
pub struct ArcDecomposition {
    partition: ArcPartition,
    arcs: Vec<usize>,
    masses: Vec<f64>,
    members: Vec<Vec<(Frequency, Complex64)>>,
}

impl ArcDecomposition {
    pub fn new(spec: &EigenfunctionSpec, partition: &ArcPartition, kset: &[usize]) -> Result<Self> {
        let mut by_arc: BTreeMap<usize, Vec<(Frequency, Complex64)>> = BTreeMap::new();
        for (p, a) in spec.points().iter().zip(spec.coefficients()) {
            if a.norm_sqr() > 0.0 {
                by_arc
                    .entry(partition.index_of(p.angle()))
                    .or_default()
                    .push((*p, *a));
            }
        }
        let mut arcs = Vec::with_capacity(kset.len());
        let mut masses = Vec::with_capacity(kset.len());
        let mut members = Vec::with_capacity(kset.len());
        for &k in kset {
            if k >= partition.len() {
                return Err(Error::InvalidParameter(format!(
                    "arc {k} out of range for K = {}",
                    partition.k()
                )));
            }
            let m = by_arc.get(&k).cloned().unwrap_or_default();
            let mass: f64 = m.iter().map(|(_, a)| a.norm_sqr()).sum();
            if mass <= 0.0 {
                return Err(Error::ZeroMassArc(k));
            }
            arcs.push(k);
            masses.push(mass);
            members.push(m);
        }
        Ok(Self {
            partition: *partition,
            arcs,
            masses,
            members,
        })
    }

    pub fn arcs(&self) -> &[usize] {
        &self.arcs
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `b_k(x)` for every arc, aligned with [`ArcDecomposition::arcs`].
    pub fn b(&self, x: [f64; 2]) -> Vec<Complex64> {
        self.members
            .iter()
            .zip(&self.masses)
            .map(|(m, mass)| {
                let s: Complex64 = m.iter().map(|(p, a)| a * torus_phase(*p, x)).sum();
                s / mass.sqrt()
            })
            .collect()
    }

    /// `φ_x` as a trigonometric sum in the rescaled variable `y`.
    pub fn phi(&self, x: [f64; 2], r: f64) -> TrigSum {
        let b = self.b(x);
        let freqs = self
            .arcs
            .iter()
            .map(|&k| {
                let z = self.partition.midpoint(k);
                [r * z[0], r * z[1]]
            })
            .collect();
        let amps = b
            .iter()
            .zip(&self.masses)
            .map(|(b, m)| m.sqrt() * b)
            .collect();
        TrigSum::new(freqs, amps)
    }
}

/// `e(⟨ξ, x⟩)` with the phase reduced per coordinate.
fn torus_phase(p: Frequency, x: [f64; 2]) -> Complex64 {
    let t = (p.x as f64 * x[0]).rem_euclid(1.0) + (p.y as f64 * x[1]).rem_euclid(1.0);
    Complex64::from_polar(1.0, TAU * t)
}

pub fn b_coefficients(
    spec: &EigenfunctionSpec,
    partition: &ArcPartition,
    kset: &[usize],
    x: [f64; 2],
) -> Result<BTreeMap<usize, Complex64>> {
    let d = ArcDecomposition::new(spec, partition, kset)?;
    Ok(d.arcs.iter().copied().zip(d.b(x)).collect())
}

pub fn phi_approx(
    spec: &EigenfunctionSpec,
    partition: &ArcPartition,
    kset: &[usize],
    x: [f64; 2],
    r: f64,
) -> Result<TrigSum> {
    Ok(ArcDecomposition::new(spec, partition, kset)?.phi(x, r))
}

/// `F_x(y) = f(x + R y/√E)` as a trigonometric sum in `y`.
pub fn local_field(spec: &EigenfunctionSpec, x: [f64; 2], r: f64) -> TrigSum {
    let scale = r / spec.frequency_radius();
    let (freqs, amps) = spec
        .points()
        .iter()
        .zip(spec.coefficients())
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(p, a)| {
            (
                [scale * p.x as f64, scale * p.y as f64],
                a * torus_phase(*p, x),
            )
        })
        .unzip();
    TrigSum::new(freqs, amps)
}

/// Gaussian counterpart of `φ_x`: `b_k` replaced by complex standard
/// Gaussians `c_k` with `c_{k+K} = c̄_k`.
pub fn gaussian_phi(
    measure: &SpectralMeasure,
    partition: &ArcPartition,
    kset: &[usize],
    r: f64,
    seed: u64,
) -> Result<TrigSum> {
    let masses = partition.masses(measure);
    let mut rng = rng::stream(seed, 2);
    let mut coef: BTreeMap<usize, Complex64> = BTreeMap::new();
    for &k in kset {
        if masses.get(k).copied().unwrap_or(0.0) <= 0.0 {
            return Err(Error::ZeroMassArc(k));
        }
        let rep = k.min(partition.antipode(k));
        coef.entry(rep).or_insert_with(|| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) / 2f64.sqrt()
        });
    }
    let (freqs, amps) = kset
        .iter()
        .map(|&k| {
            let rep = k.min(partition.antipode(k));
            let c = if rep == k {
                coef[&rep]
            } else {
                coef[&rep].conj()
            };
            let z = partition.midpoint(k);
            ([r * z[0], r * z[1]], masses[k].sqrt() * c)
        })
        .unzip();
    Ok(TrigSum::new(freqs, amps))
}

/// Largest `|A − B| + |∇A − ∇B|` over a square probe grid restricted to the
/// unit disc.
pub fn c1_distance(
    a: &dyn AnalyticField,
    b: &dyn AnalyticField,
    probe_spacing: f64,
) -> Result<f64> {
    if !(probe_spacing > 0.0 && probe_spacing <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "probe spacing {probe_spacing} must lie in (0, 1]"
        )));
    }
    let n = (1.0 / probe_spacing).floor() as i64;
    let mut worst: f64 = 0.0;
    for i in -n..=n {
        for j in -n..=n {
            let y = [i as f64 * probe_spacing, j as f64 * probe_spacing];
            if y[0] * y[0] + y[1] * y[1] > 1.0 {
                continue;
            }
            let (va, ga, _) = a.jet(y);
            let (vb, gb, _) = b.jet(y);
            let d = (va - vb).abs() + (ga[0] - gb[0]).hypot(ga[1] - gb[1]);
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub k: usize,
    pub n_arcs: usize,
    pub c1_distance: f64,
}

/// `c1_distance(F_x, φ_x)` for each `K`, keeping every arc of positive mass.
pub fn refinement_study(
    spec: &EigenfunctionSpec,
    x: [f64; 2],
    r: f64,
    ks: &[usize],
    probe_spacing: f64,
) -> Result<Vec<RefinementRow>> {
    let f = local_field(spec, x, r);
    let measure = spec.spectral_measure();
    ks.iter()
        .map(|&k| {
            let part = ArcPartition::new(k)?;
            let kset = heavy_arcs(&measure, &part, 0.0);
            let phi = phi_approx(spec, &part, &kset, x, r)?;
            Ok(RefinementRow {
                k,
                n_arcs: kset.len(),
                c1_distance: c1_distance(&f, &phi, probe_spacing)?,
            })
        })
        .collect()
}

/// A disc `B(radius, center)` on the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "degenerate ball radius {radius} at {center:?}"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Uniform point by rejection from the bounding square.
    pub fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        loop {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            if u * u + v * v <= 1.0 {
                return [
                    self.center[0] + self.radius * u,
                    self.center[1] + self.radius * v,
                ];
            }
        }
    }
}

/// Uniform point of the torus `[0, 1)²` drawn from stream 6 of `seed`.
pub fn random_center(seed: u64) -> [f64; 2] {
    let mut rng = rng::stream(seed, 6);
    [rng.gen::<f64>(), rng.gen::<f64>()]
}

/// Exponents `b_k^r b̄_k^s` on one arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcOrder {
    pub arc: usize,
    pub r: u32,
    pub s: u32,
}

pub type OrderTuple = Vec<ArcOrder>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTestReport {
    pub orders: Vec<OrderTuple>,
    pub empirical: Vec<Complex64>,
    pub gaussian: Vec<Complex64>,
    pub deviations: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
}

impl MomentTestReport {
    /// Largest `deviation / std_error`; deviations with zero error count as
    /// infinite unless they vanish.
    pub fn max_z_score(&self) -> f64 {
        self.deviations
            .iter()
            .zip(&self.std_errors)
            .map(|(d, se)| {
                if *se > 0.0 {
                    d / se
                } else if *d <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `E Π c_k^{r_k} c̄_k^{s_k}` for complex standard Gaussians with
/// `c_{k+K} = c̄_k`: orders on an antipodal arc are folded onto its partner
/// with `r` and `s` swapped, then the product of `[r = s] r!` is taken.
pub fn gaussian_moment(partition: &ArcPartition, orders: &[ArcOrder]) -> f64 {
    let mut folded: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
    for o in orders {
        let rep = o.arc.min(partition.antipode(o.arc));
        let e = folded.entry(rep).or_default();
        if rep == o.arc {
            e.0 += o.r;
            e.1 += o.s;
        } else {
            e.0 += o.s;
            e.1 += o.r;
        }
    }
    folded
        .values()
        .map(|&(r, s)| if r == s { factorial(r) } else { 0.0 })
        .product()
}

/// Order tuples with total order between 1 and `max_order`: every `(r, s)`
/// on each of the first `max_arcs` representative arcs, plus every split
/// over pairs of them.
pub fn standard_order_tuples(
    partition: &ArcPartition,
    kset: &[usize],
    max_order: u32,
    max_arcs: usize,
) -> Vec<OrderTuple> {
    let reps: Vec<usize> = kset
        .iter()
        .copied()
        .filter(|&k| k <= partition.antipode(k))
        .take(max_arcs)
        .collect();
    let splits = |n: u32| (0..=n).map(move |r| (r, n - r));
    let mut out = Vec::new();
    for &k in &reps {
        for n in 1..=max_order {
            for (r, s) in splits(n) {
                out.push(vec![ArcOrder { arc: k, r, s }]);
            }
        }
    }
    for (i, &k1) in reps.iter().enumerate() {
        for &k2 in &reps[i + 1..] {
            for n1 in 1..max_order {
                for n2 in 1..=max_order - n1 {
                    for (r1, s1) in splits(n1) {
                        for (r2, s2) in splits(n2) {
                            out.push(vec![
                                ArcOrder {
                                    arc: k1,
                                    r: r1,
                                    s: s1,
                                },
                                ArcOrder {
                                    arc: k2,
                                    r: r2,
                                    s: s2,
                                },
                            ]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Monte Carlo moments of the `b_k` for `x` uniform in `ball`.
///
/// Samples are drawn in fixed chunks, each with its own counter-derived
/// stream, and chunk sums are combined in chunk order, so the result does
/// not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn moment_test_b(
    spec: &EigenfunctionSpec,
    partition: &ArcPartition,
    kset: &[usize],
    ball: &Ball,
    orders: &[OrderTuple],
    max_order: u32,
    n_samples: usize,
    seed: u64,
) -> Result<MomentTestReport> {
    if kset.is_empty() {
        return Err(Error::InvalidParameter("empty arc set".into()));
    }
    Ball::new(ball.center, ball.radius)?;
    if n_samples < MIN_MOMENT_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "moment tests need at least {MIN_MOMENT_SAMPLES} samples, got {n_samples}"
        )));
    }
    let decomp = ArcDecomposition::new(spec, partition, kset)?;
    let slot: HashMap<usize, usize> = decomp
        .arcs
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i))
        .collect();
    let mut plans = Vec::with_capacity(orders.len());
    for t in orders {
        let total: u32 = t.iter().map(|o| o.r + o.s).sum();
        if total > max_order {
            return Err(Error::InvalidParameter(format!(
                "order tuple {t:?} has total order {total} > {max_order}"
            )));
        }
        let mut plan = Vec::with_capacity(t.len());
        for o in t {
            let Some(&i) = slot.get(&o.arc) else {
                return Err(Error::InvalidParameter(format!(
                    "arc {} is not in the arc set",
                    o.arc
                )));
            };
            plan.push((i, o.r as i32, o.s as i32));
        }
        plans.push(plan);
    }

    let n_chunks = n_samples.div_ceil(CHUNK);
    let base = rng::derive_seed(seed, MC_STREAM);
    let chunk_sums: Vec<Vec<(Complex64, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(base, c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut acc = vec![(Complex64::new(0.0, 0.0), 0.0); plans.len()];
            for _ in 0..count {
                let b = decomp.b(ball.sample(&mut rng));
                for (plan, a) in plans.iter().zip(acc.iter_mut()) {
                    let mut v = Complex64::new(1.0, 0.0);
                    for &(i, r, s) in plan {
                        v *= b[i].powi(r) * b[i].conj().powi(s);
                    }
                    a.0 += v;
                    a.1 += v.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let n = n_samples as f64;
    let mut report = MomentTestReport {
        orders: orders.to_vec(),
        empirical: Vec::with_capacity(orders.len()),
        gaussian: Vec::with_capacity(orders.len()),
        deviations: Vec::with_capacity(orders.len()),
        std_errors: Vec::with_capacity(orders.len()),
        n_samples,
    };
    for (j, t) in orders.iter().enumerate() {
        let (mut sum, mut sq) = (Complex64::new(0.0, 0.0), 0.0);
        for chunk in &chunk_sums {
            sum += chunk[j].0;
            sq += chunk[j].1;
        }
        let mean = sum / n;
        let var = (sq / n - mean.norm_sqr()).max(0.0);
        let g = Complex64::new(gaussian_moment(partition, t), 0.0);
        report.empirical.push(mean);
        report.gaussian.push(g);
        report.deviations.push((mean - g).norm());
        report.std_errors.push((var / (n - 1.0)).sqrt());
    }
    Ok(report)
}

/// How to average over a ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BallRule {
    /// Gauss-Legendre in the radius, trapezoid in the angle.
    Quadrature {
        radial: usize,
        angular: usize,
    },
    MonteCarlo {
        n_samples: usize,
        seed: u64,
    },
}

impl BallRule {
    /// A quadrature resolving `|f|^{2l}` for frequencies up to `2l·√E`.
    pub fn auto(spec: &EigenfunctionSpec, radius: f64, max_l: u32) -> Self {
        let phase = TAU * 2.0 * max_l as f64 * spec.frequency_radius() * radius;
        Self::Quadrature {
            radial: 32 + phase.ceil() as usize,
            angular: 64 + 2 * phase.ceil() as usize,
        }
    }

    /// Mean of `g` over `ball`.
    pub fn mean(&self, ball: &Ball, g: impl Fn([f64; 2]) -> f64 + Sync) -> Result<f64> {
        match *self {
            Self::Quadrature { radial, angular } => {
                let (Some(nr), true) = (NonZeroUsize::new(radial), angular >= 3) else {
                    return Err(Error::InvalidParameter(format!(
                        "quadrature needs radial ≥ 1 and angular ≥ 3 nodes, got {radial}, {angular}"
                    )));
                };
                let rule = GaussLegendre::new(nr);
                let s = ball.radius;
                let mut total = 0.0;
                for &(t, w) in rule.as_node_weight_pairs() {
                    let rho = 0.5 * s * (t + 1.0);
                    let ring: f64 = (0..angular)
                        .map(|j| {
                            let th = TAU * j as f64 / angular as f64;
                            g([
                                ball.center[0] + rho * th.cos(),
                                ball.center[1] + rho * th.sin(),
                            ])
                        })
                        .sum();
                    total += w * rho * ring;
                }
                // ∫₀ˢ dρ = s/2 ∫₋₁¹ dt, ∫₀^{2π} dθ ≈ 2π/n Σ; normalised by πs².
                Ok(total * (0.5 * s) * (TAU / angular as f64) / (PI * s * s))
            }
            Self::MonteCarlo { n_samples, seed } => {
                if n_samples == 0 {
                    return Err(Error::InvalidParameter("Monte Carlo needs samples".into()));
                }
                let base = rng::derive_seed(seed, MC_STREAM);
                let sums: Vec<f64> = (0..n_samples.div_ceil(CHUNK))
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = rng::stream(base, c as u64);
                        let count = CHUNK.min(n_samples - c * CHUNK);
                        (0..count).map(|_| g(ball.sample(&mut rng))).sum()
                    })
                    .collect();
                Ok(sums.iter().sum::<f64>() / n_samples as f64)
            }
        }
    }
}

/// The exact expansion of the ball average of `f^{2l}` into
/// `Σ_u G(u) e(⟨u, z⟩) · ball_fourier_factor(|u|, s)` over sums `u` of `2l`
/// frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumRoute {
    /// `G(0)`, the contribution of zero-sum tuples.
    pub constant: f64,
    pub oscillatory: f64,
    pub total: f64,
    /// `S(2l, E) / N^l`; equals `constant` for equimodular coefficients
    /// whose zero-sum tuples are all diagonal.
    pub correlation_constant: f64,
    /// `Σ_{u ≠ 0} |G(u)|`, at most `N^l` for unit-norm coefficients.
    pub oscillatory_mass: f64,
    /// Largest `|ball_fourier_factor|` over the nonzero sums that occur.
    pub max_ball_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FMomentRow {
    pub l: u32,
    pub direct: f64,
    pub lattice: Option<LatticeSumRoute>,
    /// `(2l)! / (2^l l!)`.
    pub gaussian: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FMomentReport {
    pub e: u64,
    pub ball: Ball,
    pub rule: BallRule,
    pub rows: Vec<FMomentRow>,
}

/// Upper bound on the work of the lattice-sum route, `N^{2l−1}` products.
pub const LATTICE_ROUTE_WORK: f64 = 5e7;

fn lattice_route(spec: &EigenfunctionSpec, ball: &Ball, l: u32) -> Result<Option<LatticeSumRoute>> {
    let n = spec.multiplicity();
    if (n as f64).powi(2 * l as i32 - 1) > LATTICE_ROUTE_WORK {
        return Ok(None);
    }
    let terms: Vec<((i64, i64), Complex64)> = spec
        .points()
        .iter()
        .zip(spec.coefficients())
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(p, a)| ((p.x, p.y), *a))
        .collect();
    // Ordered maps keep the floating-point summation order fixed.
    let mut g: BTreeMap<(i64, i64), Complex64> = terms.iter().copied().collect();
    for _ in 1..2 * l {
        let mut next: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
        for (&(ux, uy), &gv) in &g {
            for &((px, py), a) in &terms {
                *next.entry((ux + px, uy + py)).or_default() += gv * a;
            }
        }
        g = next;
    }
    let (mut constant, mut oscillatory, mut mass, mut max_factor) = (0.0, 0.0, 0.0, 0.0f64);
    for (&u, &gv) in &g {
        if u == (0, 0) {
            constant = gv.re;
            continue;
        }
        let norm = ((u.0 * u.0 + u.1 * u.1) as f64).sqrt();
        let factor = ball_fourier_factor(norm, ball.radius);
        let phase = torus_phase(Frequency::new(u.0, u.1), ball.center);
        oscillatory += (gv * phase).re * factor;
        mass += gv.norm();
        max_factor = max_factor.max(factor.abs());
    }
    let corr = spectral_correlations(
        spec.e(),
        2 * l as usize,
        CorrelationMethod::MeetInMiddle,
        &WorkBudget::default(),
    )?;
    Ok(Some(LatticeSumRoute {
        constant,
        oscillatory,
        total: constant + oscillatory,
        correlation_constant: corr.total_solutions as f64 / (n as f64).powi(l as i32),
        oscillatory_mass: mass,
        max_ball_factor: max_factor,
    }))
}

/// Normalised moments `(πs²)^{−1} ∫_{B(s,z)} f^{2l}` for `l = 1..=max_l`,
/// computed directly with `rule` and, when `N` is small enough, through the
/// lattice-sum expansion.
pub fn moment_test_f(
    spec: &EigenfunctionSpec,
    ball: &Ball,
    max_l: u32,
    rule: BallRule,
) -> Result<FMomentReport> {
    Ball::new(ball.center, ball.radius)?;
    if max_l == 0 || max_l > 6 {
        return Err(Error::InvalidParameter(format!(
            "max_l = {max_l} must lie in 1..=6"
        )));
    }
    let mut rows = Vec::with_capacity(max_l as usize);
    for l in 1..=max_l {
        let direct = rule.mean(ball, |x| spec.value(x).powi(2 * l as i32))?;
        rows.push(FMomentRow {
            l,
            direct,
            lattice: lattice_route(spec, ball, l)?,
            gaussian: factorial(2 * l) / (2f64.powi(l as i32) * factorial(l)),
        });
    }
    Ok(FMomentReport {
        e: spec.e(),
        ball: *ball,
        rule,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenfunction::build_flat_random;
    use crate::measure::Atom;

    fn cosine() -> EigenfunctionSpec {
        let h = Complex64::new(0.5, 0.0);
        EigenfunctionSpec::unnormalized(1, [(Frequency::new(1, 0), h), (Frequency::new(-1, 0), h)])
            .unwrap()
    }

    #[test]
    fn partition_covers_circle() {
        let p = ArcPartition::new(5).unwrap();
        for i in 0..p.len() {
            let (lo, hi) = p.bounds(i);
            assert_eq!(p.index_of(p.midpoint_angle(i)), i);
            assert_eq!(p.index_of(lo + 1e-12), i);
            assert_eq!(p.index_of(hi - 1e-12), i);
            assert!((p.midpoint_angle(i) - (lo + hi) / 2.0).abs() < 1e-15);
            assert_eq!(p.antipode(p.antipode(i)), i);
        }
        let total: f64 = p.masses(&SpectralMeasure::Lebesgue).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_arcs_by_binning() {
        let spec = build_flat_random(25, 1).unwrap();
        let part = ArcPartition::new(8).unwrap();
        let mut expected: Vec<usize> = spec
            .points()
            .iter()
            .map(|p| {
                // direct binning on the full turn
                let turn = (p.angle() / TAU + 1.0 / 32.0).rem_euclid(1.0);
                (turn * 16.0).floor() as usize
            })
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(heavy_arcs(&spec.spectral_measure(), &part, 0.01), expected);
        assert!(heavy_arcs(&spec.spectral_measure(), &part, 1.5).is_empty());

        let cos = cosine();
        let part4 = ArcPartition::new(4).unwrap();
        assert_eq!(heavy_arcs(&cos.spectral_measure(), &part4, 0.1), vec![0, 4]);
    }

    #[test]
    fn b_at_origin_and_conjugacy() {
        let spec = build_flat_random(5525, 3).unwrap();
        let part = ArcPartition::new(6).unwrap();
        let measure = spec.spectral_measure();
        let kset = heavy_arcs(&measure, &part, 0.0);
        let masses = part.masses(&measure);
        let b0 = b_coefficients(&spec, &part, &kset, [0.0, 0.0]).unwrap();
        for (&k, b) in &b0 {
            let sum: Complex64 = spec
                .points()
                .iter()
                .zip(spec.coefficients())
                .filter(|(p, _)| part.index_of(p.angle()) == k)
                .map(|(_, a)| *a)
                .sum();
            assert!((b - sum / masses[k].sqrt()).norm() < 1e-12);
        }
        let bx = b_coefficients(&spec, &part, &kset, [0.137, 0.891]).unwrap();
        for (&k, b) in &bx {
            assert!((b.conj() - bx[&part.antipode(k)]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_arc_is_rejected() {
        let part = ArcPartition::new(4).unwrap();
        assert!(matches!(
            b_coefficients(&cosine(), &part, &[1], [0.0, 0.0]),
            Err(Error::ZeroMassArc(1))
        ));
    }

    #[test]
    fn b_has_unit_variance_over_torus() {
        let spec = build_flat_random(5525, 7).unwrap();
        let part = ArcPartition::new(4).unwrap();
        let kset = heavy_arcs(&spec.spectral_measure(), &part, 0.0);
        let d = ArcDecomposition::new(&spec, &part, &kset).unwrap();
        // trapezoid over the full torus; exact for frequencies below the grid size
        let n = 160;
        let mut acc = vec![0.0; kset.len()];
        for i in 0..n {
            for j in 0..n {
                let b = d.b([i as f64 / n as f64, j as f64 / n as f64]);
                for (a, v) in acc.iter_mut().zip(b) {
                    *a += v.norm_sqr();
                }
            }
        }
        for a in acc {
            assert!((a / (n * n) as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn phi_matches_restriction_on_aligned_spectrum() {
        let cos = cosine();
        let part = ArcPartition::new(4).unwrap();
        let kset = heavy_arcs(&cos.spectral_measure(), &part, 0.0);
        let x = [0.21, 0.4];
        let phi = phi_approx(&cos, &part, &kset, x, 3.0).unwrap();
        let f = local_field(&cos, x, 3.0);
        assert!(c1_distance(&phi, &f, 0.05).unwrap() < 1e-12);
        let restricted = cos.restrict(x, 3.0);
        for y in [[0.0, 0.0], [0.3, -0.5], [-0.7, 0.1]] {
            assert!((f.value(y) - restricted.value(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_at_origin_sums_heavy_terms() {
        let spec = build_flat_random(5525, 11).unwrap();
        let part = ArcPartition::new(32).unwrap();
        let measure = spec.spectral_measure();
        let kset = heavy_arcs(&measure, &part, 1.0 / 40.0);
        assert!(!kset.is_empty() && kset.len() < part.len());
        let x = [0.33, 0.71];
        let phi = phi_approx(&spec, &part, &kset, x, DEFAULT_R).unwrap();
        let direct: f64 = spec
            .points()
            .iter()
            .zip(spec.coefficients())
            .filter(|(p, _)| kset.contains(&part.index_of(p.angle())))
            .map(|(p, a)| (a * torus_phase(*p, x)).re)
            .sum();
        assert!((phi.value([0.0, 0.0]) - direct).abs() < 1e-12);
        // the complex sum is real
        for y in [[0.1, 0.2], [-0.6, 0.5], [0.9, 0.0]] {
            let im: f64 = phi
                .freqs
                .iter()
                .zip(&phi.amps)
                .map(|(w, a)| {
                    (a * Complex64::from_polar(1.0, TAU * (w[0] * y[0] + w[1] * y[1]))).im
                })
                .sum();
            assert!(im.abs() < 1e-9);
        }
    }

    #[test]
    fn c1_distance_trivial_cases() {
        let spec = build_flat_random(65, 2).unwrap();
        let f = local_field(&spec, [0.1, 0.2], 4.0);
        assert_eq!(c1_distance(&f, &f, 0.1).unwrap(), 0.0);
        let mut shifted = f.clone();
        shifted.freqs.push([0.0, 0.0]);
        shifted.amps.push(Complex64::new(0.75, 0.0));
        assert!((c1_distance(&f, &shifted, 0.1).unwrap() - 0.75).abs() < 1e-12);
        assert!(c1_distance(&f, &f, 0.0).is_err());
    }

    #[test]
    fn refinement_tightens_approximation() {
        let spec = build_flat_random(5525, 5).unwrap();
        let rows =
            refinement_study(&spec, [0.4, 0.1], DEFAULT_R, &[16, 32, 64, 128, 256], 0.05).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].c1_distance <= 1.5 * w[0].c1_distance, "{rows:?}");
        }
        assert!(rows.last().unwrap().c1_distance < rows[0].c1_distance);
    }

    #[test]
    fn gaussian_moment_folding() {
        let p = ArcPartition::new(4).unwrap();
        let o = |arc, r, s| ArcOrder { arc, r, s };
        assert_eq!(gaussian_moment(&p, &[o(1, 2, 2)]), 2.0);
        assert_eq!(gaussian_moment(&p, &[o(1, 1, 0)]), 0.0);
        // b_5 = b̄_1, so b_1 b_5 = |b_1|²
        assert_eq!(gaussian_moment(&p, &[o(1, 1, 0), o(5, 1, 0)]), 1.0);
        assert_eq!(gaussian_moment(&p, &[o(1, 3, 3), o(2, 1, 1)]), 6.0);
    }

    #[test]
    fn moment_test_b_whole_torus() {
        // many atoms per arc: b_k close to Gaussian over the torus
        let spec = build_flat_random(5525, 13).unwrap();
        let part = ArcPartition::new(2).unwrap();
        let kset = heavy_arcs(&spec.spectral_measure(), &part, 0.0);
        let o = |arc, r, s| vec![ArcOrder { arc, r, s }];
        let orders = vec![o(kset[0], 1, 1), o(kset[0], 1, 0), o(kset[0], 2, 2)];
        let ball = Ball::new([0.5, 0.5], 0.5).unwrap();
        let rep = moment_test_b(&spec, &part, &kset, &ball, &orders, 8, 20_000, 3).unwrap();
        assert!(rep.deviations[0] <= 5.0 * rep.std_errors[0], "{rep:?}");
        assert!(rep.deviations[1] <= 5.0 * rep.std_errors[1], "{rep:?}");
        // 12 equal atoms per arc: E|b|⁴ = 2 − 1/12 over the torus
        assert!(
            (rep.empirical[2].re - (2.0 - 1.0 / 12.0)).abs() <= 5.0 * rep.std_errors[2],
            "{rep:?}"
        );
    }

    #[test]
    fn moment_test_b_validates() {
        let spec = build_flat_random(25, 1).unwrap();
        let part = ArcPartition::new(4).unwrap();
        let kset = heavy_arcs(&spec.spectral_measure(), &part, 0.0);
        let ball = Ball {
            center: [0.0; 2],
            radius: 0.1,
        };
        let big = vec![vec![ArcOrder {
            arc: kset[0],
            r: 5,
            s: 4,
        }]];
        assert!(moment_test_b(&spec, &part, &kset, &ball, &big, 8, 10_000, 0).is_err());
        assert!(moment_test_b(&spec, &part, &[], &ball, &[], 8, 10_000, 0).is_err());
        assert!(moment_test_b(&spec, &part, &kset, &ball, &[], 8, 100, 0).is_err());
        let flat = Ball {
            center: [0.0; 2],
            radius: 0.0,
        };
        assert!(moment_test_b(&spec, &part, &kset, &flat, &[], 8, 10_000, 0).is_err());
    }

    #[test]
    fn moment_test_b_is_thread_independent() {
        let spec = build_flat_random(1105, 4).unwrap();
        let part = ArcPartition::new(8).unwrap();
        let kset = heavy_arcs(&spec.spectral_measure(), &part, 0.0);
        let orders = standard_order_tuples(&part, &kset, 4, 2);
        let ball = Ball::new([0.3, 0.2], 0.05).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    moment_test_b(&spec, &part, &kset, &ball, &orders, 8, 30_000, 9).unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn standard_tuples_respect_order_bound() {
        let p = ArcPartition::new(8).unwrap();
        let kset: Vec<usize> = (0..16).collect();
        let t = standard_order_tuples(&p, &kset, 8, 3);
        assert!(t.iter().all(|t| {
            let n: u32 = t.iter().map(|o| o.r + o.s).sum();
            (1..=8).contains(&n) && t.iter().all(|o| o.arc < 8)
        }));
        // 3 arcs × Σ_{n=1}^{8}(n+1) singles
        assert_eq!(t.iter().filter(|t| t.len() == 1).count(), 3 * 44);
    }

    /// Ball mean by a fine midpoint rule in polar coordinates.
    fn polar_oracle(ball: &Ball, g: impl Fn([f64; 2]) -> f64) -> f64 {
        let (nr, nt) = (400, 800);
        let mut acc = 0.0;
        for i in 0..nr {
            let rho = ball.radius * (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let th = TAU * (j as f64 + 0.5) / nt as f64;
                acc += rho
                    * g([
                        ball.center[0] + rho * th.cos(),
                        ball.center[1] + rho * th.sin(),
                    ]);
            }
        }
        acc * (ball.radius / nr as f64) * (TAU / nt as f64) / (PI * ball.radius * ball.radius)
    }

    #[test]
    fn quadrature_rule_matches_oracle() {
        let spec = build_flat_random(25, 8).unwrap();
        let ball = Ball::new([0.31, 0.77], 0.3).unwrap();
        let rule = BallRule::auto(&spec, ball.radius, 2);
        let q = rule.mean(&ball, |x| spec.value(x).powi(4)).unwrap();
        let o = polar_oracle(&ball, |x| spec.value(x).powi(4));
        assert!((q - o).abs() < 1e-4, "{q} {o}");
    }

    #[test]
    fn dual_route_on_small_spectrum() {
        let spec = build_flat_random(25, 8).unwrap();
        let ball = Ball::new([0.31, 0.77], 0.3).unwrap();
        let rep = moment_test_f(&spec, &ball, 2, BallRule::auto(&spec, 0.3, 2)).unwrap();
        for row in &rep.rows {
            let lat = row.lattice.as_ref().unwrap();
            assert!((row.direct - lat.total).abs() < 1e-9, "{row:?}");
            assert!(lat.oscillatory_mass <= 12f64.powi(row.l as i32) + 1e-9);
            assert!(lat.oscillatory.abs() <= lat.oscillatory_mass * lat.max_ball_factor + 1e-12);
        }
        // l = 1: the constant term is Σ|a|² = 1
        let lat = rep.rows[0].lattice.as_ref().unwrap();
        assert!((lat.constant - 1.0).abs() < 1e-12);
        assert!((lat.correlation_constant - 1.0).abs() < 1e-12);
        // 4-term zero sums on a circle pair off, so G(0) = S(4, E)/N² for flat coefficients
        let lat = rep.rows[1].lattice.as_ref().unwrap();
        assert!((lat.constant - lat.correlation_constant).abs() < 1e-12);
        assert_eq!(rep.rows[1].gaussian, 3.0);
    }

    #[test]
    fn second_moment_over_torus_is_one() {
        let spec = build_flat_random(65, 2).unwrap();
        let ball = Ball::new([0.5, 0.5], 0.5).unwrap();
        let rep = moment_test_f(
            &spec,
            &ball,
            1,
            BallRule::MonteCarlo {
                n_samples: 200_000,
                seed: 1,
            },
        )
        .unwrap();
        assert!((rep.rows[0].direct - rep.rows[0].lattice.as_ref().unwrap().total).abs() < 0.02);
    }

    #[test]
    fn gaussian_phi_has_arc_covariance() {
        let spec = build_flat_random(5525, 21).unwrap();
        let part = ArcPartition::new(8).unwrap();
        let measure = spec.spectral_measure();
        let kset = heavy_arcs(&measure, &part, 0.0);
        let masses = part.masses(&measure);
        // same law as a Gaussian field with atoms at the arc midpoints
        let lumped = SpectralMeasure::atomic(
            kset.iter()
                .map(|&k| Atom {
                    angle: part.midpoint_angle(k),
                    mass: masses[k],
                })
                .collect(),
        )
        .unwrap();
        let lag = [0.13, -0.05];
        let n = 3000;
        let (mut v0, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let t = gaussian_phi(&measure, &part, &kset, 1.0, i as u64).unwrap();
            let a = t.value([0.0, 0.0]);
            v0.push(a * a);
            c.push(a * t.value(lag));
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, (var / v.len() as f64).sqrt())
        };
        let (m0, se0) = stats(&v0);
        let (mc, sec) = stats(&c);
        assert!((m0 - 1.0).abs() <= 3.0 * se0, "{m0} ± {se0}");
        assert!(
            (mc - lumped.covariance(lag)).abs() <= 3.0 * sec,
            "{mc} ± {sec}"
        );
    }
}
