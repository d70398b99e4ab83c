//! Sampled real fields on uniform grids, and stationary Gaussian fields
//! realised as random trigonometric sums.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;
use crate::rng;
use crate::trig::{AnalyticField, GridSpec, TrigSum};

/// A disc or an axis-aligned square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Disc { center: [f64; 2], radius: f64 },
    Square { min: [f64; 2], side: f64 },
}

impl Region {
    pub fn disc(center: [f64; 2], radius: f64) -> Self {
        Self::Disc { center, radius }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Self::Disc { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Self::Square { min, side } => {
                p[0] >= min[0] && p[0] <= min[0] + side && p[1] >= min[1] && p[1] <= min[1] + side
            }
        }
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Self::Disc { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Self::Square { min, side } => (min, [min[0] + side, min[1] + side]),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Self::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            Self::Square { side, .. } => side * side,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Disc { center, radius } => center.iter().all(|c| c.is_finite()) && radius > 0.0,
            Self::Square { min, side } => min.iter().all(|c| c.is_finite()) && side > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "degenerate region {self:?}"
            )))
        }
    }

    /// Grid with the given spacing covering the region plus `margin` samples.
    /// Samples sit at half-integer multiples of `spacing`, so lines at integer
    /// multiples (edges of the unit square, for instance) fall between them.
    pub fn covering_grid(&self, spacing: f64, margin: usize) -> Result<GridSpec> {
        self.validate()?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spacing {spacing} must be positive"
            )));
        }
        let (lo, hi) = self.bounding_box();
        let mut grid = GridSpec::covering(lo, hi, spacing, margin);
        for a in 0..2 {
            grid.origin[a] -= spacing / 2.0;
            grid.dims[a] += 1;
        }
        Ok(grid)
    }
}

/// Values (and optionally gradients) of a real function on a uniform grid.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub grid: GridSpec,
    /// `values[[i, j]]` is the sample at `grid.point(i, j)`.
    pub values: Array2<f64>,
    /// `gradients[[c, i, j]]`, component `c ∈ {0, 1}`.
    pub gradients: Option<Array3<f64>>,
    pub wavelength: f64,
    /// Analytic form, when known; lets the nodal counter resolve sub-grid topology.
    pub source: Option<Arc<dyn AnalyticField>>,
}

#[derive(Debug)]
struct Sum(Arc<TrigSum>, Arc<dyn AnalyticField>);

impl AnalyticField for Sum {
    fn jet(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        let (a, ga, ha) = self.0.jet(x);
        let (b, gb, hb) = self.1.jet(x);
        (
            a + b,
            [ga[0] + gb[0], ga[1] + gb[1]],
            [ha[0] + hb[0], ha[1] + hb[1], ha[2] + hb[2]],
        )
    }

    fn amplitude_bound(&self) -> f64 {
        self.0.amplitude_bound() + self.1.amplitude_bound()
    }
}

/// Largest admissible grid spacing for a given wavelength.
pub fn max_spacing(wavelength: f64) -> f64 {
    wavelength / 10.0
}

pub(crate) fn check_spacing(spacing: f64, wavelength: f64) -> Result<()> {
    let limit = max_spacing(wavelength);
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spacing {spacing} must be positive"
        )));
    }
    if spacing > limit * (1.0 + 1e-12) {
        return Err(Error::SpacingTooCoarse { spacing, limit });
    }
    Ok(())
}

impl SampledField {
    /// Samples a trigonometric sum with analytic gradients.
    pub fn from_trig(
        trig: Arc<TrigSum>,
        grid: GridSpec,
        with_gradients: bool,
        wavelength: f64,
    ) -> Self {
        let (values, gradients) = trig.sample_grid(&grid, with_gradients);
        Self {
            grid,
            values,
            gradients,
            wavelength,
            source: Some(trig),
        }
    }

    /// Samples a trigonometric sum plus a smooth perturbation; the saddle
    /// analysis sees the perturbed function.
    pub fn from_trig_perturbed(
        trig: Arc<TrigSum>,
        psi: Arc<dyn AnalyticField>,
        grid: GridSpec,
        wavelength: f64,
    ) -> Self {
        let (mut values, gradients) = trig.sample_grid(&grid, true);
        let mut gradients = gradients.expect("requested gradients");
        for i in 0..grid.dims[0] {
            for j in 0..grid.dims[1] {
                let (v, g, _) = psi.jet(grid.point(i, j));
                values[[i, j]] += v;
                gradients[[0, i, j]] += g[0];
                gradients[[1, i, j]] += g[1];
            }
        }
        Self {
            grid,
            values,
            gradients: Some(gradients),
            wavelength,
            source: Some(Arc::new(Sum(trig, psi))),
        }
    }

    /// Samples an arbitrary function; no gradients.
    pub fn from_fn(grid: GridSpec, wavelength: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values =
            Array2::from_shape_fn((grid.dims[0], grid.dims[1]), |(i, j)| f(grid.point(i, j)));
        Self {
            grid,
            values,
            gradients: None,
            wavelength,
            source: None,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing
    }

    /// Text dump: a header line `origin_x origin_y spacing nx ny wavelength`,
    /// then `nx` lines of `ny` values each.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = format!(
            "{:?} {:?} {:?} {} {} {:?}\n",
            g.origin[0], g.origin[1], g.spacing, g.dims[0], g.dims[1], self.wavelength
        );
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field dump".into()))?
            .split_whitespace()
            .collect();
        if header.len() != 6 {
            return Err(Error::Parse("field header needs 6 entries".into()));
        }
        let f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("'{s}': {e}")))
        };
        let u = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("'{s}': {e}")))
        };
        let grid = GridSpec {
            origin: [f(header[0])?, f(header[1])?],
            spacing: f(header[2])?,
            dims: [u(header[3])?, u(header[4])?],
        };
        let wavelength = f(header[5])?;
        let mut data = Vec::with_capacity(grid.dims[0] * grid.dims[1]);
        for line in lines {
            for tok in line.split_whitespace() {
                data.push(f(tok)?);
            }
        }
        let values = Array2::from_shape_vec((grid.dims[0], grid.dims[1]), data)
            .map_err(|e| Error::Parse(format!("field body: {e}")))?;
        Ok(Self {
            grid,
            values,
            gradients: None,
            wavelength,
            source: None,
        })
    }
}

/// Random sum `Σ_pairs 2√m_k Re(c_k e(⟨ζ_k, x⟩))` over pair representatives
/// `ζ_k` (unit vectors), with `c_k` complex Gaussians of unit second moment,
/// so that `Var F(x) = Σ_atoms m = 1`.
pub fn random_trig(measure: &SpectralMeasure, k: usize, seed: u64) -> Result<TrigSum> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let pairs = measure.pairs(k);
    let mut rng = rng::stream(seed, 2);
    let mut freqs = Vec::with_capacity(pairs.len());
    let mut amps = Vec::with_capacity(pairs.len());
    for a in &pairs {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let c = Complex64::new(re, im) * FRAC_1_SQRT_2;
        freqs.push(a.direction());
        amps.push(c * (2.0 * a.mass.sqrt()));
    }
    Ok(TrigSum::new(freqs, amps))
}

/// One realization of the unit-frequency Gaussian field with spectral measure
/// `measure` (Lebesgue discretised into `2K` atoms), sampled over `region`.
pub fn sample_field(
    measure: &SpectralMeasure,
    k: usize,
    region: &Region,
    spacing: f64,
    seed: u64,
) -> Result<SampledField> {
    sample_field_with(measure, k, region, spacing, seed, true)
}

pub fn sample_field_with(
    measure: &SpectralMeasure,
    k: usize,
    region: &Region,
    spacing: f64,
    seed: u64,
    with_gradients: bool,
) -> Result<SampledField> {
    check_spacing(spacing, 1.0)?;
    let trig = Arc::new(random_trig(measure, k, seed)?);
    let grid = region.covering_grid(spacing, 2)?;
    Ok(SampledField::from_trig(trig, grid, with_gradients, 1.0))
}
