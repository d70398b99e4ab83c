//! Real trigonometric sums `f(x) = Re Σ_k A_k e(⟨ω_k, x⟩)` with `e(t) = e^{2πit}`.
//!
//! Grid evaluation is separable: `e(⟨ω, x⟩) = e(ω₁x₁) e(ω₂x₂)`, so a whole
//! grid is one complex product of an `nx × K` and a `K × ny` table, carried
//! out as a single real matrix multiplication.

use std::f64::consts::TAU;

use ndarray::{s, Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform grid: point `(i, j)` sits at `origin + (i·spacing, j·spacing)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub dims: [usize; 2],
}

impl GridSpec {
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
        ]
    }

    /// Smallest grid on integer multiples of `spacing` that covers the box
    /// `[lo, hi]` plus `margin` extra samples on every side.
    pub fn covering(lo: [f64; 2], hi: [f64; 2], spacing: f64, margin: usize) -> Self {
        let m = margin as f64;
        let mut origin = [0.0; 2];
        let mut dims = [0usize; 2];
        for a in 0..2 {
            let first = (lo[a] / spacing).floor() - m;
            let last = (hi[a] / spacing).ceil() + m;
            origin[a] = first * spacing;
            dims[a] = (last - first) as usize + 1;
        }
        Self {
            origin,
            spacing,
            dims,
        }
    }
}

/// A smooth real function known in closed form.
pub trait AnalyticField: Send + Sync + std::fmt::Debug {
    /// Value, gradient and Hessian `[f_xx, f_xy, f_yy]` at `x`.
    fn jet(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]);

    /// An upper bound for `|f|`, used to scale degeneracy tolerances.
    fn amplitude_bound(&self) -> f64;
}

/// `Re Σ_k A_k e(⟨ω_k, x⟩)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigSum {
    pub freqs: Vec<[f64; 2]>,
    pub amps: Vec<Complex64>,
}

/// `e(t)` for `t = start + i·step`, `i < n`; incremental rotation,
/// re-anchored periodically to keep the phase error at machine level.
fn phase_table(start: f64, step: f64, n: usize, freq: f64) -> Vec<Complex64> {
    const ANCHOR: usize = 32;
    let rot = Complex64::from_polar(1.0, TAU * freq * step);
    let mut out = Vec::with_capacity(n);
    let mut cur = Complex64::new(0.0, 0.0);
    for i in 0..n {
        if i % ANCHOR == 0 {
            let t = freq * (start + i as f64 * step);
            cur = Complex64::from_polar(1.0, TAU * t.rem_euclid(1.0));
        } else {
            cur *= rot;
        }
        out.push(cur);
    }
    out
}

impl TrigSum {
    pub fn new(freqs: Vec<[f64; 2]>, amps: Vec<Complex64>) -> Self {
        assert_eq!(freqs.len(), amps.len());
        Self { freqs, amps }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    fn terms(&self, x: [f64; 2]) -> impl Iterator<Item = ([f64; 2], Complex64)> + '_ {
        self.freqs.iter().zip(&self.amps).map(move |(w, a)| {
            let t = (w[0] * x[0] + w[1] * x[1]).rem_euclid(1.0);
            (*w, a * Complex64::from_polar(1.0, TAU * t))
        })
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.terms(x).map(|(_, e)| e.re).sum()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (w, e) in self.terms(x) {
            g[0] -= TAU * w[0] * e.im;
            g[1] -= TAU * w[1] * e.im;
        }
        g
    }

    /// Value, gradient and Hessian `[f_xx, f_xy, f_yy]` at `x`.
    pub fn jet(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        let (mut v, mut g, mut h) = (0.0, [0.0; 2], [0.0; 3]);
        let c = TAU * TAU;
        for (w, e) in self.terms(x) {
            v += e.re;
            g[0] -= TAU * w[0] * e.im;
            g[1] -= TAU * w[1] * e.im;
            h[0] -= c * w[0] * w[0] * e.re;
            h[1] -= c * w[0] * w[1] * e.re;
            h[2] -= c * w[1] * w[1] * e.re;
        }
        (v, g, h)
    }

    /// Values on `grid` as `[nx, ny]`, and optionally gradients as `[2, nx, ny]`.
    pub fn sample_grid(
        &self,
        grid: &GridSpec,
        with_gradients: bool,
    ) -> (Array2<f64>, Option<Array3<f64>>) {
        let [nx, ny] = grid.dims;
        let k = self.len();
        let blocks = if with_gradients { 3 } else { 1 };
        // lhs rows: [Re U | −Im U] for U, U·2πiω₁, U·2πiω₂ stacked.
        let mut lhs = Array2::<f64>::zeros((blocks * nx, 2 * k));
        let mut rhs = Array2::<f64>::zeros((2 * k, ny));
        for (c, (w, a)) in self.freqs.iter().zip(&self.amps).enumerate() {
            let px = phase_table(grid.origin[0], grid.spacing, nx, w[0]);
            let py = phase_table(grid.origin[1], grid.spacing, ny, w[1]);
            let muls = [
                *a,
                a * Complex64::new(0.0, TAU * w[0]),
                a * Complex64::new(0.0, TAU * w[1]),
            ];
            for (b, m) in muls.iter().take(blocks).enumerate() {
                for (i, p) in px.iter().enumerate() {
                    let u = m * p;
                    lhs[[b * nx + i, c]] = u.re;
                    lhs[[b * nx + i, k + c]] = -u.im;
                }
            }
            for (j, p) in py.iter().enumerate() {
                rhs[[c, j]] = p.re;
                rhs[[k + c, j]] = p.im;
            }
        }
        let out = lhs.dot(&rhs);
        let values = out.slice(s![0..nx, ..]).to_owned();
        let grads = with_gradients.then(|| {
            let mut g = Array3::<f64>::zeros((2, nx, ny));
            g.slice_mut(s![0, .., ..])
                .assign(&out.slice(s![nx..2 * nx, ..]));
            g.slice_mut(s![1, .., ..])
                .assign(&out.slice(s![2 * nx..3 * nx, ..]));
            g
        });
        (values, grads)
    }
}

impl AnalyticField for TrigSum {
    fn jet(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 3]) {
        TrigSum::jet(self, x)
    }

    fn amplitude_bound(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).sum()
    }
}
