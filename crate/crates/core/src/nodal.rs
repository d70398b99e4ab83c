//! Nodal domains and nodal length of sampled fields inside a region.
//!
//! Grid samples are the pixels. Same-sign 4-neighbours are joined with a
//! union-find; a component counts as inside when none of its pixels lies in
//! the boundary ring of the region mask. When gradients are available, each
//! same-sign edge is checked for a hidden pair of zeros with cubic Hermite
//! interpolation, and cells whose boundary changes sign four or more times are
//! resolved through the saddle point of the analytic source.

use std::collections::HashMap;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arithmetic::multiplicity;
use crate::boundary::BoundaryAdaptedSpec;
use crate::eigenfunction::EigenfunctionSpec;
use crate::error::{Error, Result};
use crate::field::{check_spacing, SampledField};
use crate::rng;
use crate::trig::{AnalyticField, TrigSum};

pub use crate::field::Region;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub domains_inside: usize,
    pub domains_touching_boundary: usize,
    pub positive_inside: usize,
    pub negative_inside: usize,
    pub nodal_length: f64,
    pub grid_spacing_used: f64,
    pub region: Region,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodalOptions {
    /// Compute the marching-squares nodal length.
    pub length: bool,
    /// Use gradients and the analytic source to resolve sub-grid topology.
    pub refine: bool,
}

impl Default for NodalOptions {
    fn default() -> Self {
        Self {
            length: true,
            refine: true,
        }
    }
}

/// `wavelength / 12` for a field of the given frequency radius.
pub fn faber_krahn_spacing(frequency_radius: f64) -> f64 {
    1.0 / (12.0 * frequency_radius)
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn push(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Index window of the grid covering a region, with a one-sample margin.
struct Window {
    i0: usize,
    j0: usize,
    nx: usize,
    ny: usize,
}

impl Window {
    fn new(field: &SampledField, region: &Region) -> Result<Self> {
        let g = &field.grid;
        let h = g.spacing;
        let (lo, hi) = region.bounding_box();
        let tol = 1e-9 * h;
        let mut start = [0usize; 2];
        let mut len = [0usize; 2];
        for a in 0..2 {
            let last = g.origin[a] + (g.dims[a] as f64 - 1.0) * h;
            if lo[a] - h < g.origin[a] - tol || hi[a] + h > last + tol {
                return Err(Error::RegionNotCovered(format!(
                    "axis {a}: region [{}, {}] needs one sample of margin inside [{}, {}]",
                    lo[a], hi[a], g.origin[a], last
                )));
            }
            let first = (((lo[a] - g.origin[a]) / h).floor() as isize - 1).max(0) as usize;
            let end = ((((hi[a] - g.origin[a]) / h).ceil() as usize) + 1).min(g.dims[a] - 1);
            start[a] = first;
            len[a] = end - first + 1;
        }
        Ok(Self {
            i0: start[0],
            j0: start[1],
            nx: len[0],
            ny: len[1],
        })
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }
}

/// Parameter in `(0, 1)` of an interior extremum of the cubic Hermite
/// interpolant that has the opposite sign of both (same-signed) endpoints.
fn hidden_crossing(f0: f64, f1: f64, m0: f64, m1: f64) -> Option<f64> {
    let sigma = if f0 >= 0.0 { 1.0 } else { -1.0 };
    // an interior σ-extremum needs the curve to head towards zero first
    if sigma * m0 >= 0.0 && sigma * m1 <= 0.0 {
        return None;
    }
    let a = 2.0 * f0 + m0 - 2.0 * f1 + m1;
    let b = -3.0 * f0 - 2.0 * m0 + 3.0 * f1 - m1;
    let c = m0;
    let eval = |t: f64| ((a * t + b) * t + c) * t + f0;
    // H'(t) = 3a t² + 2b t + c
    let (qa, qb, qc) = (3.0 * a, 2.0 * b, c);
    let mut roots = [f64::NAN; 2];
    if qa.abs() < 1e-14 * (qb.abs() + qc.abs()) {
        if qb != 0.0 {
            roots[0] = -qc / qb;
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        roots[0] = q / qa;
        if q != 0.0 {
            roots[1] = qc / q;
        }
    }
    roots
        .into_iter()
        .filter(|t| *t > 0.0 && *t < 1.0)
        .map(|t| (t, sigma * eval(t)))
        .filter(|(_, v)| *v < 0.0)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(t, _)| t)
}

/// Value at the saddle point of `src` found by Newton's method on `∇f = 0`
/// from `start`, if it converges within `2h` of the start.
fn saddle_value(src: &dyn AnalyticField, start: [f64; 2], h: f64) -> Option<f64> {
    let mut x = start;
    for _ in 0..40 {
        let (_, g, hs) = src.jet(x);
        let det = hs[0] * hs[2] - hs[1] * hs[1];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = -(hs[2] * g[0] - hs[1] * g[1]) / det;
        let dy = -(-hs[1] * g[0] + hs[0] * g[1]) / det;
        x = [x[0] + dx, x[1] + dy];
        if (x[0] - start[0]).hypot(x[1] - start[1]) > 2.0 * h {
            return None;
        }
        if dx.hypot(dy) <= 1e-10 * h {
            let (v, _, hs) = src.jet(x);
            return (hs[0] * hs[2] - hs[1] * hs[1] < 0.0).then_some(v);
        }
    }
    None
}

struct Counter<'a> {
    field: &'a SampledField,
    region: &'a Region,
    win: Window,
    values: ArrayView2<'a, f64>,
}

impl<'a> Counter<'a> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.values[[self.win.i0 + i, self.win.j0 + j]]
    }

    fn point(&self, i: usize, j: usize) -> [f64; 2] {
        self.field.grid.point(self.win.i0 + i, self.win.j0 + j)
    }

    fn grad(&self, c: usize, i: usize, j: usize) -> Option<f64> {
        self.field
            .gradients
            .as_ref()
            .map(|g| g[[c, self.win.i0 + i, self.win.j0 + j]])
    }

    /// Which sign connects across an ambiguous cell; `None` when degenerate.
    fn resolve_cell(
        &self,
        i: usize,
        j: usize,
        has_virtual: bool,
        refine: bool,
        tol: f64,
    ) -> Option<bool> {
        let h = self.field.grid.spacing;
        let p = self.point(i, j);
        let center = [p[0] + 0.5 * h, p[1] + 0.5 * h];
        if refine {
            if let Some(src) = &self.field.source {
                if let Some(v) = saddle_value(src.as_ref(), center, h) {
                    return (v.abs() > tol).then_some(v >= 0.0);
                }
            }
        }
        let f = [
            self.value(i, j),
            self.value(i + 1, j),
            self.value(i + 1, j + 1),
            self.value(i, j + 1),
        ];
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !has_virtual {
            // saddle value of the bilinear interpolant
            let den = f[0] + f[2] - f[1] - f[3];
            if den == 0.0 {
                return None;
            }
            let v = (f[0] * f[2] - f[1] * f[3]) / den;
            return (v.abs() > 1e-12 * scale).then_some(v >= 0.0);
        }
        // first-order Taylor estimate of the centre value
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        let mut est = 0.0;
        for (k, &(ci, cj)) in corners.iter().enumerate() {
            let q = self.point(ci, cj);
            let (gx, gy) = (
                self.grad(0, ci, cj).unwrap_or(0.0),
                self.grad(1, ci, cj).unwrap_or(0.0),
            );
            est += f[k] + gx * (center[0] - q[0]) + gy * (center[1] - q[1]);
        }
        Some(est >= 0.0)
    }

    fn count(&self, opts: &NodalOptions) -> (usize, usize, usize, usize) {
        let (nx, ny) = (self.win.nx, self.win.ny);
        let n = nx * ny;
        let h = self.field.grid.spacing;
        let mut inside = vec![false; n];
        let mut sign = vec![false; n];
        for i in 0..nx {
            for j in 0..ny {
                let l = self.win.idx(i, j);
                inside[l] = self.region.contains(self.point(i, j));
                sign[l] = self.value(i, j) >= 0.0;
            }
        }
        let mut ring = vec![false; n];
        for i in 0..nx {
            for j in 0..ny {
                let l = self.win.idx(i, j);
                if !inside[l] {
                    continue;
                }
                let edge = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
                ring[l] =
                    edge || !inside[l - ny] || !inside[l + ny] || !inside[l - 1] || !inside[l + 1];
            }
        }

        let refine = opts.refine && self.field.gradients.is_some();
        let mut dsu = Dsu::new(n);
        let mut vsign: Vec<bool> = Vec::new();
        // bit 0: edge to (i+1, j) has a hidden crossing; bit 1: edge to (i, j+1)
        let mut flags = vec![0u8; n];
        let mut hidden: HashMap<(usize, u8), u32> = HashMap::new();
        for i in 0..nx {
            for j in 0..ny {
                let l = self.win.idx(i, j);
                if !inside[l] {
                    continue;
                }
                for (dir, (di, dj)) in [(0u8, (1usize, 0usize)), (1u8, (0, 1))] {
                    let (i2, j2) = (i + di, j + dj);
                    if i2 >= nx || j2 >= ny {
                        continue;
                    }
                    let l2 = self.win.idx(i2, j2);
                    if !inside[l2] || sign[l] != sign[l2] {
                        continue;
                    }
                    if refine {
                        let c = dir as usize;
                        let m0 = self.grad(c, i, j).unwrap() * h;
                        let m1 = self.grad(c, i2, j2).unwrap() * h;
                        if hidden_crossing(self.value(i, j), self.value(i2, j2), m0, m1).is_some() {
                            let v = dsu.push();
                            vsign.push(!sign[l]);
                            flags[l] |= 1 << dir;
                            hidden.insert((l, dir), v);
                            continue;
                        }
                    }
                    dsu.union(l as u32, l2 as u32);
                }
            }
        }

        let tol = self
            .field
            .source
            .as_ref()
            .map_or(0.0, |s| 1e-10 * s.amplitude_bound());
        let node_sign = |id: u32, vsign: &Vec<bool>| {
            if (id as usize) < n {
                sign[id as usize]
            } else {
                vsign[id as usize - n]
            }
        };
        for i in 0..nx.saturating_sub(1) {
            for j in 0..ny.saturating_sub(1) {
                let c = [
                    self.win.idx(i, j),
                    self.win.idx(i + 1, j),
                    self.win.idx(i + 1, j + 1),
                    self.win.idx(i, j + 1),
                ];
                if !c.iter().all(|&l| inside[l]) {
                    continue;
                }
                let edge_flags = [
                    flags[c[0]] & 1 != 0,
                    flags[c[1]] & 2 != 0,
                    flags[c[3]] & 1 != 0,
                    flags[c[0]] & 2 != 0,
                ];
                let any_flag = edge_flags.iter().any(|&f| f);
                let s = [sign[c[0]], sign[c[1]], sign[c[2]], sign[c[3]]];
                if !any_flag && !(s[0] == s[2] && s[1] == s[3] && s[0] != s[1]) {
                    continue;
                }
                let mut cycle: [u32; 8] = [0; 8];
                let mut len = 0;
                let edge_keys = [(c[0], 0u8), (c[1], 1u8), (c[3], 0u8), (c[0], 1u8)];
                for k in 0..4 {
                    cycle[len] = c[k] as u32;
                    len += 1;
                    if edge_flags[k] {
                        cycle[len] = hidden[&edge_keys[k]];
                        len += 1;
                    }
                }
                let changes = (0..len)
                    .filter(|&k| {
                        node_sign(cycle[k], &vsign) != node_sign(cycle[(k + 1) % len], &vsign)
                    })
                    .count();
                if changes < 4 {
                    continue;
                }
                if let Some(joined) = self.resolve_cell(i, j, any_flag, refine, tol) {
                    let mut first: Option<u32> = None;
                    for &node in &cycle[..len] {
                        if node_sign(node, &vsign) == joined {
                            match first {
                                None => first = Some(node),
                                Some(f) => dsu.union(f, node),
                            }
                        }
                    }
                }
            }
        }

        // root state: bit 0 has a pixel, bit 1 touches the ring, bit 2 positive
        let mut state = vec![0u8; dsu.parent.len()];
        for l in 0..n {
            if !inside[l] {
                continue;
            }
            let r = dsu.find(l as u32) as usize;
            state[r] |= 1 | if ring[l] { 2 } else { 0 } | if sign[l] { 4 } else { 0 };
        }
        let (mut pos_in, mut neg_in, mut touching) = (0, 0, 0);
        for st in state {
            if st & 1 == 0 {
                continue;
            }
            if st & 2 != 0 {
                touching += 1;
            } else if st & 4 != 0 {
                pos_in += 1;
            } else {
                neg_in += 1;
            }
        }
        (pos_in + neg_in, touching, pos_in, neg_in)
    }

    fn segments(&self) -> Vec<[[f64; 2]; 2]> {
        let mut out = Vec::new();
        let h = self.field.grid.spacing;
        for i in 0..self.win.nx - 1 {
            for j in 0..self.win.ny - 1 {
                let f = [
                    self.value(i, j),
                    self.value(i + 1, j),
                    self.value(i + 1, j + 1),
                    self.value(i, j + 1),
                ];
                let s: Vec<bool> = f.iter().map(|v| *v >= 0.0).collect();
                if s.iter().all(|&b| b == s[0]) {
                    continue;
                }
                let p = self.point(i, j);
                let corner = [p, [p[0] + h, p[1]], [p[0] + h, p[1] + h], [p[0], p[1] + h]];
                // edge k joins corner k and k+1
                let cross = |k: usize| -> Option<[f64; 2]> {
                    let (a, b) = (k, (k + 1) % 4);
                    (s[a] != s[b]).then(|| {
                        let t = f[a] / (f[a] - f[b]);
                        [
                            corner[a][0] + t * (corner[b][0] - corner[a][0]),
                            corner[a][1] + t * (corner[b][1] - corner[a][1]),
                        ]
                    })
                };
                let pts: Vec<(usize, [f64; 2])> =
                    (0..4).filter_map(|k| cross(k).map(|q| (k, q))).collect();
                let mut push = |a: [f64; 2], b: [f64; 2]| {
                    if let Some(seg) = clip(self.region, a, b) {
                        out.push(seg);
                    }
                };
                if pts.len() == 2 {
                    push(pts[0].1, pts[1].1);
                } else if pts.len() == 4 {
                    let center = 0.25 * f.iter().sum::<f64>();
                    let e: Vec<[f64; 2]> = pts.iter().map(|x| x.1).collect();
                    if (center >= 0.0) == s[0] {
                        // corners 1 and 3 are cut off
                        push(e[0], e[1]);
                        push(e[2], e[3]);
                    } else {
                        push(e[3], e[0]);
                        push(e[1], e[2]);
                    }
                }
            }
        }
        out
    }
}

/// Part of segment `a → b` inside the region.
fn clip(region: &Region, a: [f64; 2], b: [f64; 2]) -> Option<[[f64; 2]; 2]> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (lo, hi) = match *region {
        Region::Disc { center, radius } => {
            let p = [a[0] - center[0], a[1] - center[1]];
            let qa = d[0] * d[0] + d[1] * d[1];
            if qa == 0.0 {
                return None;
            }
            let qb = 2.0 * (p[0] * d[0] + p[1] * d[1]);
            let qc = p[0] * p[0] + p[1] * p[1] - radius * radius;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            (
                ((-qb - sq) / (2.0 * qa)).max(0.0),
                ((-qb + sq) / (2.0 * qa)).min(1.0),
            )
        }
        Region::Square { min, side } => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for k in 0..2 {
                let (lo_k, hi_k) = (min[k], min[k] + side);
                if d[k] == 0.0 {
                    if a[k] < lo_k || a[k] > hi_k {
                        return None;
                    }
                } else {
                    let (t1, t2) = ((lo_k - a[k]) / d[k], (hi_k - a[k]) / d[k]);
                    lo = lo.max(t1.min(t2));
                    hi = hi.min(t1.max(t2));
                }
            }
            (lo, hi)
        }
    };
    (hi > lo).then(|| {
        [
            [a[0] + lo * d[0], a[1] + lo * d[1]],
            [a[0] + hi * d[0], a[1] + hi * d[1]],
        ]
    })
}

fn prepare<'a>(field: &'a SampledField, region: &'a Region) -> Result<Counter<'a>> {
    check_spacing(field.grid.spacing, field.wavelength)?;
    let win = Window::new(field, region)?;
    Ok(Counter {
        field,
        region,
        win,
        values: field.values.view(),
    })
}

pub fn count_nodal_domains(field: &SampledField, region: &Region) -> Result<NodalReport> {
    count_nodal_domains_with(field, region, &NodalOptions::default())
}

pub fn count_nodal_domains_with(
    field: &SampledField,
    region: &Region,
    opts: &NodalOptions,
) -> Result<NodalReport> {
    let counter = prepare(field, region)?;
    let (inside, touching, pos, neg) = counter.count(opts);
    let nodal_length = if opts.length {
        segment_length(&counter.segments())
    } else {
        0.0
    };
    Ok(NodalReport {
        domains_inside: inside,
        domains_touching_boundary: touching,
        positive_inside: pos,
        negative_inside: neg,
        nodal_length,
        grid_spacing_used: field.grid.spacing,
        region: *region,
    })
}

fn segment_length(segs: &[[[f64; 2]; 2]]) -> f64 {
    segs.iter()
        .map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1]))
        .sum()
}

/// Length of the marching-squares zero set clipped to the region.
pub fn nodal_length(field: &SampledField, region: &Region) -> Result<f64> {
    Ok(segment_length(&nodal_segments(field, region)?))
}

/// Marching-squares zero-set segments clipped to the region.
pub fn nodal_segments(field: &SampledField, region: &Region) -> Result<Vec<[[f64; 2]; 2]>> {
    Ok(prepare(field, region)?.segments())
}

/// Samples an eigenfunction over a region at the given spacing, with gradients.
pub fn sample_spec(
    spec: &EigenfunctionSpec,
    region: &Region,
    spacing: f64,
) -> Result<SampledField> {
    sample_trig(
        std::sync::Arc::new(spec.to_trig()),
        spec.wavelength(),
        region,
        spacing,
    )
}

/// Samples a trigonometric sum over a region (plus margin), with gradients.
pub fn sample_trig(
    trig: std::sync::Arc<TrigSum>,
    wavelength: f64,
    region: &Region,
    spacing: f64,
) -> Result<SampledField> {
    check_spacing(spacing, wavelength)?;
    let grid = region.covering_grid(spacing, 2)?;
    Ok(SampledField::from_trig(trig, grid, true, wavelength))
}

/// Nodal length of a boundary-adapted eigenfunction in `B(radius, center)`.
///
/// The eigenfunction is read through its periodic extension, so the edges of
/// the square (zero lines for Dirichlet) count towards the length. The spacing
/// is rounded down to `h = 1/⌈1/spacing⌉` so that no sample lies on an edge.
pub fn boundary_nodal_length(
    spec: &BoundaryAdaptedSpec,
    center: [f64; 2],
    radius: f64,
    spacing: f64,
) -> Result<f64> {
    let wavelength = 1.0 / spec.frequency_radius();
    check_spacing(spacing, wavelength)?;
    let h = 1.0 / (1.0 / spacing).ceil();
    let region = Region::disc(center, radius);
    let grid = region.covering_grid(h, 2)?;
    let field =
        SampledField::from_trig(std::sync::Arc::new(spec.to_trig()), grid, true, wavelength);
    nodal_length(&field, &region)
}

/// Nodal lengths in balls of radius `C/√E` centred at points spread evenly
/// along the boundary of the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLengthStudy {
    pub e: u64,
    pub n: usize,
    pub c: f64,
    pub radius: f64,
    pub centers: Vec<[f64; 2]>,
    pub lengths: Vec<f64>,
    /// `ℒ √E / N` per centre.
    pub ratios: Vec<f64>,
}

/// Point at arc-length parameter `t ∈ [0, 4)` along the boundary of `[0, 1]²`.
pub fn square_boundary_point(t: f64) -> [f64; 2] {
    let t = t.rem_euclid(4.0);
    match t as u32 {
        0 => [t, 0.0],
        1 => [1.0, t - 1.0],
        2 => [3.0 - t, 1.0],
        _ => [0.0, 4.0 - t],
    }
}

pub fn boundary_length_study(
    spec: &BoundaryAdaptedSpec,
    c: f64,
    n_points: usize,
) -> Result<BoundaryLengthStudy> {
    if !(c > 0.0) || n_points == 0 {
        return Err(Error::InvalidParameter(format!(
            "boundary study needs C > 0 and points; got C = {c}, n = {n_points}"
        )));
    }
    let sqrt_e = (spec.e as f64).sqrt();
    let radius = c / sqrt_e;
    let n = multiplicity(spec.e);
    let spacing = faber_krahn_spacing(spec.frequency_radius());
    let centers: Vec<[f64; 2]> = (0..n_points)
        .map(|i| square_boundary_point(4.0 * (i as f64 + 0.5) / n_points as f64))
        .collect();
    let lengths = centers
        .iter()
        .map(|&z| boundary_nodal_length(spec, z, radius, spacing))
        .collect::<Result<Vec<_>>>()?;
    let ratios = lengths.iter().map(|l| l * sqrt_e / n as f64).collect();
    Ok(BoundaryLengthStudy {
        e: spec.e,
        n,
        c,
        radius,
        centers,
        lengths,
        ratios,
    })
}

/// Comparison of the nodal count in `B(s, z)` with the average over centres
/// `x ∈ B(s, z)` of counts in the small balls `B(R/√E, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiLocalityRecord {
    pub e: u64,
    pub s: f64,
    pub center: [f64; 2],
    pub r: f64,
    pub n_centers: usize,
    pub lhs: f64,
    /// Mean count over the small balls.
    pub mean_small_count: f64,
    pub mean_small_count_std_error: f64,
    /// `E s² / R² · mean_small_count`, i.e. `E/(πR²) ∫_{B(s,z)} 𝒩(R/√E, x) dx`.
    pub rhs: f64,
    /// `π · rhs`, the right side with prefactor `E/R²`.
    pub rhs_unit_prefactor: f64,
    pub difference: f64,
    /// `E s² / √R`.
    pub bound_scale: f64,
    /// `|difference| / bound_scale`.
    pub fitted_constant: f64,
}

pub fn semi_locality_check(
    spec: &EigenfunctionSpec,
    s: f64,
    z: [f64; 2],
    r: f64,
    n_centers: usize,
    seed: u64,
) -> Result<SemiLocalityRecord> {
    semi_locality_check_trig(
        std::sync::Arc::new(spec.to_trig()),
        spec.e(),
        s,
        z,
        r,
        n_centers,
        seed,
    )
}

/// As [`semi_locality_check`], for a field given as a trigonometric sum with
/// frequency radius `√E`.
pub fn semi_locality_check_trig(
    trig: std::sync::Arc<TrigSum>,
    e: u64,
    s: f64,
    z: [f64; 2],
    r: f64,
    n_centers: usize,
    seed: u64,
) -> Result<SemiLocalityRecord> {
    let k = (e as f64).sqrt();
    if !(s > 0.0) || !(r >= 4.0) || n_centers == 0 {
        return Err(Error::InvalidParameter(format!(
            "semi-locality needs s > 0, R ≥ 4 and centres; got s = {s}, R = {r}, n = {n_centers}"
        )));
    }
    let small = r / k;
    let spacing = faber_krahn_spacing(k);
    let big = Region::disc(z, s + small);
    let field = sample_trig(trig, 1.0 / k, &big, spacing)?;
    let opts = NodalOptions {
        length: false,
        refine: true,
    };
    let lhs = count_nodal_domains_with(&field, &Region::disc(z, s), &opts)?.domains_inside as f64;
    let mut rng = rng::stream(seed, 3);
    let mut counts = Vec::with_capacity(n_centers);
    while counts.len() < n_centers {
        let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if u[0] * u[0] + u[1] * u[1] > 1.0 {
            continue;
        }
        let x = [z[0] + s * u[0], z[1] + s * u[1]];
        let c = count_nodal_domains_with(&field, &Region::disc(x, small), &opts)?.domains_inside;
        counts.push(c as f64);
    }
    let m = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / m;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let rhs = e as f64 * s * s / (r * r) * mean;
    let scale = e as f64 * s * s / r.sqrt();
    Ok(SemiLocalityRecord {
        e,
        s,
        center: z,
        r,
        n_centers,
        lhs,
        mean_small_count: mean,
        mean_small_count_std_error: (var / m).sqrt(),
        rhs,
        rhs_unit_prefactor: std::f64::consts::PI * rhs,
        difference: lhs - rhs,
        bound_scale: scale,
        fitted_constant: (lhs - rhs).abs() / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::GridSpec;
    use std::f64::consts::{PI, TAU};

    fn field_from(grid: GridSpec, wavelength: f64, f: impl Fn([f64; 2]) -> f64) -> SampledField {
        SampledField::from_fn(grid, wavelength, f)
    }

    #[test]
    fn boundary_length_of_single_mode() {
        use crate::arithmetic::Frequency;
        use crate::boundary::BoundaryCondition;
        // sin(3πx) sin(4πy): zero lines x = k/3, y = k/4 and the square edges
        let spec = BoundaryAdaptedSpec {
            e: 25,
            condition: BoundaryCondition::Dirichlet,
            terms: vec![(Frequency::new(3, 4), 1.0)],
        };
        // disc of radius 0.1 at (0, 0.6): meets x = 0 over a chord of 0.2 and
        // no other zero line (y = 0.5, 0.75 are 0.1 and 0.15 away)
        let l = boundary_nodal_length(&spec, [0.0, 0.6], 0.1, 1.0 / 400.0).unwrap();
        assert!((l - 0.2).abs() < 1e-3, "{l}");
        // centre (1/3, 0.3), radius 0.1: the line x = 1/3 gives a chord 0.2
        // and y = 1/4 (0.05 away) a chord 2√(0.01 − 0.0025)
        let l = boundary_nodal_length(&spec, [1.0 / 3.0, 0.3], 0.1, 1.0 / 400.0).unwrap();
        let expected = 0.2 + 2.0 * (0.0075f64).sqrt();
        assert!((l - expected).abs() < 2e-3, "{l} {expected}");
        let p = square_boundary_point(2.5);
        assert_eq!(p, [0.5, 1.0]);
    }

    #[test]
    fn hidden_crossing_detection() {
        // (t − 0.5)² − 0.01 on [0, 1]: both ends positive, dips below zero
        let f = |t: f64| (t - 0.5) * (t - 0.5) - 0.01;
        let df = |t: f64| 2.0 * (t - 0.5);
        let t = hidden_crossing(f(0.0), f(1.0), df(0.0), df(1.0)).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        let g = |t: f64| (t - 0.5) * (t - 0.5) + 0.01;
        assert!(hidden_crossing(g(0.0), g(1.0), df(0.0), df(1.0)).is_none());
        assert!(hidden_crossing(-g(0.0), -g(1.0), -df(0.0), -df(1.0)).is_none());
        assert!(hidden_crossing(-f(0.0), -f(1.0), -df(0.0), -df(1.0)).is_some());
        assert!(hidden_crossing(1.0, 2.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn clipping() {
        let d = Region::disc([0.0, 0.0], 1.0);
        let s = clip(&d, [-2.0, 0.0], [2.0, 0.0]).unwrap();
        assert!((s[0][0] + 1.0).abs() < 1e-15 && (s[1][0] - 1.0).abs() < 1e-15);
        assert!(clip(&d, [-2.0, 2.0], [2.0, 2.0]).is_none());
        let q = Region::Square {
            min: [0.0, 0.0],
            side: 1.0,
        };
        let s = clip(&q, [-1.0, 0.5], [0.5, 0.5]).unwrap();
        assert_eq!(s, [[0.0, 0.5], [0.5, 0.5]]);
        assert!(clip(&q, [2.0, 0.5], [3.0, 0.5]).is_none());
    }

    #[test]
    fn constant_field_has_no_length_and_one_touching_domain() {
        let grid = GridSpec::covering([-1.0, -1.0], [1.0, 1.0], 0.05, 2);
        let f = field_from(grid, 1.0, |_| 1.0);
        let r = count_nodal_domains(&f, &Region::disc([0.0, 0.0], 0.8)).unwrap();
        assert_eq!(r.domains_inside, 0);
        assert_eq!(r.domains_touching_boundary, 1);
        assert_eq!(r.nodal_length, 0.0);
    }

    #[test]
    fn single_bump_is_inside() {
        // one negative disc of radius 0.3 in a positive background
        let grid = GridSpec::covering([-1.0, -1.0], [1.0, 1.0], 0.01, 2);
        let f = field_from(grid, 0.2, |p| p[0] * p[0] + p[1] * p[1] - 0.09);
        let r = count_nodal_domains(&f, &Region::disc([0.0, 0.0], 0.8)).unwrap();
        assert_eq!(
            (
                r.domains_inside,
                r.negative_inside,
                r.domains_touching_boundary
            ),
            (1, 1, 1)
        );
        assert!((r.nodal_length - TAU * 0.3).abs() < 1e-3);
    }

    #[test]
    fn coverage_and_spacing_errors() {
        let grid = GridSpec::covering([-1.0, -1.0], [1.0, 1.0], 0.05, 0);
        let f = field_from(grid, 1.0, |p| p[0]);
        assert!(matches!(
            count_nodal_domains(&f, &Region::disc([0.0, 0.0], 1.0)),
            Err(Error::RegionNotCovered(_))
        ));
        let f = field_from(grid, 0.1, |p| p[0]);
        assert!(matches!(
            count_nodal_domains(&f, &Region::disc([0.0, 0.0], 0.5)),
            Err(Error::SpacingTooCoarse { .. })
        ));
    }

    #[test]
    fn stripes_have_no_inside_domains() {
        let m = 10.0;
        let s = 0.4;
        let grid = GridSpec::covering([-s, -s], [s, s], 1.0 / 120.0, 2);
        let f = field_from(grid, 1.0 / m, |p| (TAU * m * p[0]).cos());
        let r = count_nodal_domains(&f, &Region::disc([0.0, 0.0], s)).unwrap();
        assert_eq!(r.domains_inside, 0);
        assert!((r.nodal_length / (2.0 * PI * m * s * s) - 1.0).abs() < 0.02);
    }

    #[test]
    fn saddle_resolution_uses_source() {
        // a·cos(2πx) + b·cos(2πy) with a slightly above b: strips, no compact
        // domains, although the pinches are far below the grid resolution
        let trig = std::sync::Arc::new(TrigSum::new(
            vec![[1.0, 0.0], [0.0, 1.0]],
            vec![
                num_complex::Complex64::new(1.0 + 1e-6, 0.0),
                num_complex::Complex64::new(1.0, 0.0),
            ],
        ));
        let region = Region::disc([0.013, 0.021], 5.0);
        let f = sample_trig(trig, 1.0, &region, 1.0 / 12.0).unwrap();
        let r = count_nodal_domains(&f, &region).unwrap();
        assert_eq!(r.domains_inside, 0);
    }
    #[test]
    fn semi_locality_below_a_wavelength() {
        let spec = crate::eigenfunction::build_flat_random(325, 1).unwrap();
        let s = 0.5 / 325f64.sqrt();
        let rec = semi_locality_check(&spec, s, [0.3, 0.6], 4.0, 50, 0).unwrap();
        assert_eq!(rec.lhs, 0.0);
        // (s√E / R)² = 1/64 of the small-ball mean
        assert!((rec.rhs - rec.mean_small_count / 64.0).abs() < 1e-12);
        assert!(rec.rhs < 0.2);
    }

    #[test]
    fn semi_locality_regression_fixture() {
        let spec = crate::eigenfunction::build_flat_random(325, 1).unwrap();
        let rec = semi_locality_check(&spec, 0.25, [0.3, 0.6], 6.0, 100, 0).unwrap();
        assert_eq!(rec.lhs, 12.0);
        assert!((rec.mean_small_count - 22.99).abs() < 1e-9);
        assert!((rec.rhs - 325.0 * 0.0625 / 36.0 * 22.99).abs() < 1e-9);
        assert!((rec.bound_scale - 325.0 * 0.0625 / 6f64.sqrt()).abs() < 1e-12);
        assert!(semi_locality_check(&spec, 0.25, [0.3, 0.6], 3.0, 10, 0).is_err());
    }
}
