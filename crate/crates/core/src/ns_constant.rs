//! Monte Carlo estimates of the Nazarov-Sodin constant `c(μ)`, defined by
//! `E[𝒩(F_μ, R)] ≈ c(μ) R²` for the unit-frequency field `F_μ`, and the
//! comparison of small-ball nodal counts of eigenfunctions with it.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{is_sum_of_two_squares, multiplicity};
use crate::eigenfunction::{build_flat_random, EigenfunctionSpec};
use crate::error::{Error, Result};
use crate::field::{random_trig, Region, SampledField};
use crate::measure::SpectralMeasure;
use crate::nodal::{count_nodal_domains_with, faber_krahn_spacing, sample_spec, NodalOptions};
use crate::rng;
use crate::trig::AnalyticField;

/// Default number of arcs per half circle for the Lebesgue measure.
pub const DEFAULT_K: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnsEstimate {
    pub measure: String,
    pub r: f64,
    pub k: usize,
    pub n_realizations: usize,
    pub mean_count: f64,
    /// `mean_count / R²`
    pub estimate: f64,
    /// Standard error of `estimate`.
    pub std_error: f64,
    pub seed: u64,
    pub counts: Vec<usize>,
}

fn summarize(
    measure: &SpectralMeasure,
    r: f64,
    k: usize,
    seed: u64,
    counts: Vec<usize>,
) -> CnsEstimate {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    CnsEstimate {
        measure: measure.label().to_string(),
        r,
        k,
        n_realizations: counts.len(),
        mean_count: mean,
        estimate: mean / (r * r),
        std_error: (var / n).sqrt() / (r * r),
        seed,
        counts,
    }
}

fn validate(r: f64, n_realizations: usize) -> Result<()> {
    if !(r >= 10.0) {
        return Err(Error::InvalidParameter(format!(
            "R = {r} must be at least 10"
        )));
    }
    if n_realizations < 50 {
        return Err(Error::InvalidParameter(format!(
            "{n_realizations} realizations; at least 50 are required"
        )));
    }
    Ok(())
}

/// Number of nodal domains of one realization lying entirely inside `B(R)`.
fn realization_count(
    measure: &SpectralMeasure,
    r: f64,
    k: usize,
    seed: u64,
    index: u64,
    psi: Option<&Arc<dyn AnalyticField>>,
) -> Result<usize> {
    let region = Region::disc([0.0, 0.0], r);
    let spacing = faber_krahn_spacing(1.0);
    let trig = Arc::new(random_trig(measure, k, rng::derive_seed(seed, index))?);
    let grid = region.covering_grid(spacing, 2)?;
    let field = match psi {
        None => SampledField::from_trig(trig, grid, true, 1.0),
        Some(p) => SampledField::from_trig_perturbed(trig, p.clone(), grid, 1.0),
    };
    let opts = NodalOptions {
        length: false,
        refine: true,
    };
    Ok(count_nodal_domains_with(&field, &region, &opts)?.domains_inside)
}

fn run_counts(
    measure: &SpectralMeasure,
    r: f64,
    k: usize,
    n: usize,
    seed: u64,
    psi: Option<&Arc<dyn AnalyticField>>,
) -> Result<Vec<usize>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| realization_count(measure, r, k, seed, i, psi))
        .collect()
}

/// Mean number of nodal domains of `F_μ` inside `B(R)`, divided by `R²`.
pub fn estimate_cns(
    measure: &SpectralMeasure,
    r: f64,
    k: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<CnsEstimate> {
    validate(r, n_realizations)?;
    let counts = run_counts(measure, r, k, n_realizations, seed, None)?;
    Ok(summarize(measure, r, k, seed, counts))
}

/// Fixed combination of Gaussian bumps of unit width, scaled so that
/// `sup|ψ| + sup|∇ψ|` (sampled on a grid over `B(R)`) equals `amplitude`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpPerturbation {
    pub centers: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub width: f64,
    pub scale: f64,
}

impl BumpPerturbation {
    pub fn new(r: f64, amplitude: f64) -> Self {
        let mut centers = vec![[0.0, 0.0]];
        let mut weights = vec![1.0];
        for (k, rho) in [0.3, 0.6, 0.85].iter().enumerate() {
            for j in 0..6 {
                let a = (j as f64 + 0.5 * k as f64) * PI / 3.0;
                centers.push([rho * r * a.cos(), rho * r * a.sin()]);
                weights.push(if (j + k) % 2 == 0 { 1.0 } else { -0.7 });
            }
        }
        let mut psi = Self {
            centers,
            weights,
            width: 1.0,
            scale: 1.0,
        };
        let norm = psi.c1_norm_on_disc(r, 0.05);
        psi.scale = if norm > 0.0 { amplitude / norm } else { 0.0 };
        psi
    }

    /// `sup|ψ| + sup|∇ψ|` over grid points of `B(R)` with the given spacing.
    pub fn c1_norm_on_disc(&self, r: f64, spacing: f64) -> f64 {
        let n = (r / spacing).ceil() as i64;
        let (mut vmax, mut gmax) = (0.0f64, 0.0f64);
        for i in -n..=n {
            for j in -n..=n {
                let p = [i as f64 * spacing, j as f64 * spacing];
                if p[0] * p[0] + p[1] * p[1] > r * r {
                    continue;
                }
                let (v, g, _) = self.jet(p);
                vmax = vmax.max(v.abs());
                gmax = gmax.max(g[0].hypot(g[1]));
            }
        }
        vmax + gmax
    }
}

impl AnalyticField for BumpPerturbation {
    fn jet(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        let (mut v, mut g, mut h) = (0.0, [0.0; 2], [0.0; 3]);
        let w2 = self.width * self.width;
        for (c, wt) in self.centers.iter().zip(&self.weights) {
            let d = [x[0] - c[0], x[1] - c[1]];
            let e = self.scale * wt * (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * w2)).exp();
            v += e;
            g[0] -= e * d[0] / w2;
            g[1] -= e * d[1] / w2;
            h[0] += e * (d[0] * d[0] / w2 - 1.0) / w2;
            h[1] += e * d[0] * d[1] / (w2 * w2);
            h[2] += e * (d[1] * d[1] / w2 - 1.0) / w2;
        }
        (v, g, h)
    }

    fn amplitude_bound(&self) -> f64 {
        self.scale.abs() * self.weights.iter().map(|w| w.abs()).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub psi_amplitude: f64,
    pub baseline: CnsEstimate,
    pub perturbed: CnsEstimate,
    pub difference: f64,
    pub relative_change: f64,
}

/// Paired estimates (same realizations) with and without a perturbation of
/// the given `C¹` size added to every realization.
pub fn stability_probe(
    measure: &SpectralMeasure,
    r: f64,
    k: usize,
    psi_amplitude: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<StabilityReport> {
    validate(r, n_realizations)?;
    if !(psi_amplitude >= 0.0) {
        return Err(Error::InvalidParameter(
            "perturbation amplitude must be nonnegative".into(),
        ));
    }
    let baseline = estimate_cns(measure, r, k, n_realizations, seed)?;
    let perturbed = if psi_amplitude == 0.0 {
        baseline.clone()
    } else {
        let psi: Arc<dyn AnalyticField> = Arc::new(BumpPerturbation::new(r, psi_amplitude));
        let counts = run_counts(measure, r, k, n_realizations, seed, Some(&psi))?;
        summarize(measure, r, k, seed, counts)
    };
    let difference = perturbed.estimate - baseline.estimate;
    let relative_change = if baseline.estimate == 0.0 {
        if difference == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        difference.abs() / baseline.estimate
    };
    Ok(StabilityReport {
        psi_amplitude,
        baseline,
        perturbed,
        difference,
        relative_change,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterCount {
    pub center: [f64; 2],
    pub count: usize,
    /// `count / (π s² E · ĉ/π)`
    pub ratio: f64,
    /// `count / (π s² E · ĉ)`
    pub raw_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub e: u64,
    pub n: usize,
    pub seed: u64,
    pub s_exponent: f64,
    pub s: f64,
    /// `s√E`, the ball radius in wavelengths.
    pub radius_in_wavelengths: f64,
    pub flatness_index: f64,
    pub cns: CnsEstimate,
    /// `ĉ/π`, the expected number of domains per unit area at unit wavelength.
    pub domain_density: f64,
    /// `s² E ĉ`, the predicted count.
    pub predicted_count: f64,
    pub centers: Vec<CenterCount>,
    pub median_ratio: f64,
    pub mean_ratio: f64,
    pub median_deviation: f64,
}

/// Smallest admissible ball radius in wavelengths.
pub const MIN_RADIUS_IN_WAVELENGTHS: f64 = 3.0;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Counts nodal domains of a flat random eigenfunction in balls `B(s, z)`,
/// `s = E^{s_exponent}`, and compares them with `s² E ĉ`, where `ĉ` estimates
/// the constant of the eigenfunction's spectral measure.
#[allow(clippy::too_many_arguments)]
pub fn theorem3_experiment(
    e: u64,
    seed: u64,
    s_exponent: f64,
    n_centers: usize,
    r: f64,
    k: usize,
    n_realizations: usize,
) -> Result<Theorem3Report> {
    if !is_sum_of_two_squares(e) {
        return Err(Error::NotSumOfTwoSquares(e));
    }
    let spec = build_flat_random(e, seed)?;
    theorem3_with_spec(&spec, seed, s_exponent, n_centers, r, k, n_realizations)
}

#[allow(clippy::too_many_arguments)]
pub fn theorem3_with_spec(
    spec: &EigenfunctionSpec,
    seed: u64,
    s_exponent: f64,
    n_centers: usize,
    r: f64,
    k: usize,
    n_realizations: usize,
) -> Result<Theorem3Report> {
    let e = spec.e();
    if !(s_exponent > -0.5 && s_exponent < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "s exponent {s_exponent} outside (-1/2, 0)"
        )));
    }
    if n_centers == 0 {
        return Err(Error::InvalidParameter(
            "at least one centre is required".into(),
        ));
    }
    let s = (e as f64).powf(s_exponent);
    let k_rad = spec.frequency_radius();
    let in_wavelengths = s * k_rad;
    if in_wavelengths < MIN_RADIUS_IN_WAVELENGTHS {
        return Err(Error::InvalidParameter(format!(
            "ball radius s = {s:.4} is only {in_wavelengths:.2} wavelengths; at least {MIN_RADIUS_IN_WAVELENGTHS} are needed"
        )));
    }
    let cns = estimate_cns(
        &spec.spectral_measure(),
        r,
        k,
        n_realizations,
        rng::derive_seed(seed, 1 << 40),
    )?;
    let density = cns.estimate / PI;
    let predicted = s * s * (e as f64) * cns.estimate;

    let mut rng = rng::stream(seed, 4);
    let zs: Vec<[f64; 2]> = (0..n_centers)
        .map(|_| [rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let spacing = faber_krahn_spacing(k_rad);
    let opts = NodalOptions {
        length: false,
        refine: true,
    };
    let counts: Vec<usize> = zs
        .par_iter()
        .map(|&z| {
            let region = Region::disc(z, s);
            let field = sample_spec(spec, &region, spacing)?;
            Ok(count_nodal_domains_with(&field, &region, &opts)?.domains_inside)
        })
        .collect::<Result<_>>()?;
    let centers: Vec<CenterCount> = zs
        .iter()
        .zip(&counts)
        .map(|(&z, &c)| {
            let base = PI * s * s * e as f64;
            CenterCount {
                center: z,
                count: c,
                ratio: ratio(c as f64, base * density),
                raw_ratio: ratio(c as f64, base * cns.estimate),
            }
        })
        .collect();
    let mut ratios: Vec<f64> = centers.iter().map(|c| c.ratio).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let median_ratio = median(&mut ratios);
    Ok(Theorem3Report {
        e,
        n: multiplicity(e),
        seed,
        s_exponent,
        s,
        radius_in_wavelengths: in_wavelengths,
        flatness_index: spec.flatness_index(),
        cns,
        domain_density: density,
        predicted_count: predicted,
        centers,
        median_ratio,
        mean_ratio,
        median_deviation: (median_ratio - 1.0).abs(),
    })
}

fn ratio(count: f64, predicted: f64) -> f64 {
    if predicted > 0.0 {
        count / predicted
    } else if count == 0.0 {
        f64::NAN
    } else {
        f64::INFINITY
    }
}
