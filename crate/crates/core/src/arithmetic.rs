//! Exact lattice-point arithmetic on circles `|ξ|² = E`.
//!
//! Everything here works with integer vectors: representations of `E` as a
//! sum of two squares, the number `S(l, E)` of ordered `l`-tuples of lattice
//! points summing to zero, and the smallest nonzero norm such a sum can take.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest eigenvalue accepted by the factorisation routines.
pub const DEFAULT_MAX_E: u64 = 100_000_000;

/// Default ceiling on the estimated operation count of an enumeration.
pub const DEFAULT_WORK_CEILING: f64 = 1e9;

/// An integer lattice point, normally lying on a circle `x² + y² = E`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frequency {
    pub x: i64,
    pub y: i64,
}

impl Frequency {
    pub const ZERO: Frequency = Frequency { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    /// Builds a frequency and checks that it lies on the circle of radius `√e`.
    pub fn on_circle(x: i64, y: i64, e: u64) -> Result<Self> {
        let f = Self::new(x, y);
        if f.norm_sq() != e as i128 {
            return Err(Error::InvalidSpec(format!(
                "frequency ({x}, {y}) does not satisfy |ξ|² = {e}"
            )));
        }
        Ok(f)
    }

    pub fn norm_sq(self) -> i128 {
        let (x, y) = (self.x as i128, self.y as i128);
        x * x + y * y
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Polar angle in `[0, 2π)`.
    pub fn angle(self) -> f64 {
        let a = (self.y as f64).atan2(self.x as f64);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }

    /// True for the member of an antipodal pair `{ξ, −ξ}` whose angle lies in `[0, π)`.
    pub fn is_pair_representative(self) -> bool {
        self.y > 0 || (self.y == 0 && self.x > 0)
    }

    pub fn as_f64(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }
}

impl Neg for Frequency {
    type Output = Frequency;
    fn neg(self) -> Frequency {
        Frequency::new(-self.x, -self.y)
    }
}

impl Add for Frequency {
    type Output = Frequency;
    fn add(self, o: Frequency) -> Frequency {
        Frequency::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Frequency {
    type Output = Frequency;
    fn sub(self, o: Frequency) -> Frequency {
        Frequency::new(self.x - o.x, self.y - o.y)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Ceiling on the estimated number of elementary steps an enumeration may take.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkBudget {
    pub ceiling: f64,
}

impl Default for WorkBudget {
    fn default() -> Self {
        Self {
            ceiling: DEFAULT_WORK_CEILING,
        }
    }
}

impl WorkBudget {
    pub fn new(ceiling: f64) -> Self {
        Self { ceiling }
    }

    pub fn check(&self, estimated: f64) -> Result<()> {
        if estimated > self.ceiling {
            Err(Error::BudgetExceeded {
                estimated,
                ceiling: self.ceiling,
            })
        } else {
            Ok(())
        }
    }
}

/// Prime factorisation by trial division, as `(p, exponent)` pairs in increasing `p`.
///
/// `factorize(1)` is empty. Intended for `n ≤ DEFAULT_MAX_E`, although any
/// `u64` terminates (slowly for large primes).
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut push = |p: u64, n: &mut u64| {
        let mut k = 0;
        while n.is_multiple_of(p) {
            *n /= p;
            k += 1;
        }
        if k > 0 {
            out.push((p, k));
        }
    };
    push(2, &mut n);
    let mut p = 3u64;
    while p.saturating_mul(p) <= n {
        push(p, &mut n);
        p += 2;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Whether `n` is a sum of two integer squares: every prime `q ≡ 3 (mod 4)`
/// divides `n` to an even power. Zero is not in the spectrum and returns false.
pub fn is_sum_of_two_squares(n: u64) -> bool {
    n != 0 && factorize(n).iter().all(|&(p, k)| p % 4 != 3 || k % 2 == 0)
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All `ξ ∈ ℤ²` with `|ξ|² = e`, sorted by ascending angle in `[0, 2π)`.
pub fn lattice_points(e: u64) -> Vec<Frequency> {
    let mut pts = Vec::new();
    if e == 0 {
        return pts;
    }
    let r = isqrt(e);
    for a in 0..=r {
        let rest = e - a * a;
        let b = isqrt(rest);
        if b * b != rest {
            continue;
        }
        let (a, b) = (a as i64, b as i64);
        for (sx, sy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
            let p = Frequency::new(sx * a, sy * b);
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
    }
    pts.sort_by(|p, q| p.angle().total_cmp(&q.angle()));
    pts
}

/// `N(E)`, the number of lattice points on the circle of radius `√E`.
pub fn multiplicity(e: u64) -> usize {
    lattice_points(e).len()
}

/// `N(E)` from the factorisation: `4 ∏_{p ≡ 1 (4)} (α_p + 1)` when `E` is a sum
/// of two squares, zero otherwise.
pub fn multiplicity_from_factorization(e: u64) -> usize {
    if !is_sum_of_two_squares(e) {
        return 0;
    }
    4 * factorize(e)
        .iter()
        .filter(|(p, _)| p % 4 == 1)
        .map(|&(_, k)| k as usize + 1)
        .product::<usize>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Exhaustive,
    MeetInMiddle,
}

impl std::str::FromStr for CorrelationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "meet_in_middle" | "meet-in-middle" | "mitm" => Ok(Self::MeetInMiddle),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Counts of zero-sum ordered tuples of lattice points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub e: u64,
    pub tuple_len: usize,
    pub n: usize,
    pub total_solutions: u128,
    pub diagonal_solutions: u128,
    pub off_diagonal_solutions: u128,
    /// `(2l)!/(2^l l!) · N^l` for `tuple_len = 2l`; zero for odd lengths.
    pub predicted_diagonal: u128,
}

/// `(2l)! / (2^l l!) · N^l`, the number of pairings times `N^l`.
pub fn predicted_diagonal(n: usize, tuple_len: usize) -> u128 {
    if tuple_len % 2 == 1 {
        return 0;
    }
    let l = tuple_len / 2;
    // (2l-1)!! = (2l)! / (2^l l!)
    let pairings: u128 = (1..=l as u128).map(|k| 2 * k - 1).product();
    pairings * (n as u128).pow(l as u32)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r = 1u128;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of ordered `tuple_len`-tuples over `n` lattice points (`n/2`
/// antipodal classes) in which each class `{ξ, −ξ}` appears as often with `ξ`
/// as with `−ξ`. These are exactly the unions of antipodal pairs.
pub fn diagonal_count(n: usize, tuple_len: usize) -> u128 {
    if tuple_len % 2 == 1 || n == 0 {
        return u128::from(tuple_len == 0);
    }
    let l = tuple_len / 2;
    let classes = n / 2;
    // ways[t]: sequences of length 2t built from the classes seen so far.
    let mut ways = vec![0u128; l + 1];
    ways[0] = 1;
    for _ in 0..classes {
        let mut next = vec![0u128; l + 1];
        for t in 0..=l {
            if ways[t] == 0 {
                continue;
            }
            for k in 0..=(l - t) {
                let placements = binomial((2 * t + 2 * k) as u128, (2 * k) as u128)
                    * binomial((2 * k) as u128, k as u128);
                next[t + k] += ways[t] * placements;
            }
        }
        ways = next;
    }
    ways[l]
}

fn check_tuple_len(tuple_len: usize) -> Result<()> {
    if !(1..=12).contains(&tuple_len) {
        return Err(Error::InvalidParameter(format!(
            "tuple length {tuple_len} outside 1..=12"
        )));
    }
    Ok(())
}

/// `S(l, E)`: ordered `l`-tuples of lattice points on `|ξ|² = E` with zero sum,
/// split into diagonal (unions of antipodal pairs) and off-diagonal solutions.
///
/// Odd lengths return zero without enumeration, since a sum of an odd number
/// of vectors with `x + y ≡ E (mod 2)` cannot vanish.
pub fn spectral_correlations(
    e: u64,
    tuple_len: usize,
    method: CorrelationMethod,
    budget: &WorkBudget,
) -> Result<CorrelationReport> {
    check_tuple_len(tuple_len)?;
    let pts = lattice_points(e);
    let n = pts.len();
    let mut report = CorrelationReport {
        e,
        tuple_len,
        n,
        total_solutions: 0,
        diagonal_solutions: 0,
        off_diagonal_solutions: 0,
        predicted_diagonal: predicted_diagonal(n, tuple_len),
    };
    if tuple_len % 2 == 1 || n == 0 {
        return Ok(report);
    }
    let (total, diagonal) = match method {
        CorrelationMethod::Exhaustive => {
            budget.check((n as f64).powi(tuple_len as i32))?;
            exhaustive_counts(&pts, tuple_len)
        }
        CorrelationMethod::MeetInMiddle => {
            let half = tuple_len / 2;
            budget.check((n as f64).powi(half as i32))?;
            let table = half_sum_counts(&pts, half);
            let total = table
                .iter()
                .map(|(&(x, y), &c)| c as u128 * *table.get(&(-x, -y)).unwrap_or(&0) as u128)
                .sum();
            (total, diagonal_count(n, tuple_len))
        }
    };
    report.total_solutions = total;
    report.diagonal_solutions = diagonal;
    report.off_diagonal_solutions = total - diagonal;
    Ok(report)
}

/// Index of the antipodal class of each point, and the sign (+1 for the
/// representative, -1 for its negative).
fn antipodal_classes(pts: &[Frequency]) -> Vec<(usize, i32)> {
    let mut class_of: HashMap<Frequency, usize> = HashMap::new();
    for p in pts.iter().filter(|p| p.is_pair_representative()) {
        let id = class_of.len();
        class_of.insert(*p, id);
    }
    pts.iter()
        .map(|p| {
            if p.is_pair_representative() {
                (class_of[p], 1)
            } else {
                (class_of[&-*p], -1)
            }
        })
        .collect()
}

/// Brute force over all `n^len` tuples; returns (zero-sum count, diagonal count).
fn exhaustive_counts(pts: &[Frequency], len: usize) -> (u128, u128) {
    let n = pts.len();
    let classes = antipodal_classes(pts);
    let mut balance = vec![0i32; n / 2];
    let mut unbalanced = 0usize;
    let mut idx = vec![0usize; len];
    let (mut sx, mut sy) = (0i64, 0i64);

    let apply = |i: usize, sign: i32, balance: &mut Vec<i32>, unbalanced: &mut usize| {
        let (c, s) = classes[i];
        let before = balance[c];
        balance[c] += sign * s;
        match (before == 0, balance[c] == 0) {
            (true, false) => *unbalanced += 1,
            (false, true) => *unbalanced -= 1,
            _ => {}
        }
    };
    for &i in &idx {
        sx += pts[i].x;
        sy += pts[i].y;
        apply(i, 1, &mut balance, &mut unbalanced);
    }

    let (mut total, mut diagonal) = (0u128, 0u128);
    loop {
        if sx == 0 && sy == 0 {
            total += 1;
            if unbalanced == 0 {
                diagonal += 1;
            }
        }
        // odometer increment
        let mut pos = len;
        loop {
            if pos == 0 {
                return (total, diagonal);
            }
            pos -= 1;
            let old = idx[pos];
            sx -= pts[old].x;
            sy -= pts[old].y;
            apply(old, -1, &mut balance, &mut unbalanced);
            if old + 1 < n {
                idx[pos] = old + 1;
                let new = old + 1;
                sx += pts[new].x;
                sy += pts[new].y;
                apply(new, 1, &mut balance, &mut unbalanced);
                break;
            }
            idx[pos] = 0;
            sx += pts[0].x;
            sy += pts[0].y;
            apply(0, 1, &mut balance, &mut unbalanced);
        }
    }
}

/// Multiplicities of all ordered `half`-fold sums.
fn half_sum_counts(pts: &[Frequency], half: usize) -> HashMap<(i64, i64), u64> {
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    table.insert((0, 0), 1);
    for _ in 0..half {
        let mut next: HashMap<(i64, i64), u64> = HashMap::with_capacity(table.len() * pts.len());
        for (&(x, y), &c) in &table {
            for p in pts {
                *next.entry((x + p.x, y + p.y)).or_insert(0) += c;
            }
        }
        table = next;
    }
    table
}

/// Every ordered `half`-fold sum, keyed by its value, with one witness tuple.
/// Ordered maps make the choice of witness reproducible.
fn half_sum_witnesses(pts: &[Frequency], half: usize) -> BTreeMap<(i64, i64), Vec<Frequency>> {
    let mut table: BTreeMap<(i64, i64), Vec<Frequency>> = BTreeMap::new();
    table.insert((0, 0), Vec::new());
    for _ in 0..half {
        let mut next: BTreeMap<(i64, i64), Vec<Frequency>> = BTreeMap::new();
        for (&(x, y), w) in &table {
            for p in pts {
                next.entry((x + p.x, y + p.y)).or_insert_with(|| {
                    let mut v = w.clone();
                    v.push(*p);
                    v
                });
            }
        }
        table = next;
    }
    table
}

/// The smallest nonzero `|ξ₁ + … + ξ_l|` and a tuple attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiCorrelationReport {
    pub e: u64,
    pub tuple_len: usize,
    pub min_nonzero_norm_sq: u64,
    pub min_nonzero_norm: f64,
    pub attaining_tuple: Vec<Frequency>,
}

/// Bucket grid for nearest-neighbour queries over integer points.
struct BucketGrid {
    cell: i64,
    buckets: HashMap<(i64, i64), Vec<(i64, i64)>>,
    min_cell: (i64, i64),
    max_cell: (i64, i64),
}

impl BucketGrid {
    fn new(points: &[(i64, i64)], cell: i64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
        let (mut lo, mut hi) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
        for &(x, y) in points {
            let c = (x.div_euclid(cell), y.div_euclid(cell));
            lo = (lo.0.min(c.0), lo.1.min(c.1));
            hi = (hi.0.max(c.0), hi.1.max(c.1));
            buckets.entry(c).or_default().push((x, y));
        }
        for b in buckets.values_mut() {
            b.sort_unstable();
        }
        Self {
            cell,
            buckets,
            min_cell: lo,
            max_cell: hi,
        }
    }

    /// Nearest stored point to `q` other than `q` itself, if closer than
    /// `best_sq`. Ties resolve to the lexicographically smallest point.
    fn nearest_excluding(&self, q: (i64, i64), mut best_sq: u64) -> Option<((i64, i64), u64)> {
        let qc = (q.0.div_euclid(self.cell), q.1.div_euclid(self.cell));
        let mut best: Option<((i64, i64), u64)> = None;
        let max_ring = (self.max_cell.0 - self.min_cell.0).max(self.max_cell.1 - self.min_cell.1)
            + (qc.0 - self.min_cell.0)
                .abs()
                .max((qc.1 - self.min_cell.1).abs())
            + 1;
        for ring in 0..=max_ring {
            // points beyond this ring are at least `ring * cell` away
            let reach = (ring * self.cell) as u64;
            if ring > 0 && reach * reach > best_sq {
                break;
            }
            for cx in (qc.0 - ring)..=(qc.0 + ring) {
                for cy in (qc.1 - ring)..=(qc.1 + ring) {
                    if (cx - qc.0).abs() != ring && (cy - qc.1).abs() != ring {
                        continue;
                    }
                    let Some(bucket) = self.buckets.get(&(cx, cy)) else {
                        continue;
                    };
                    for &p in bucket {
                        if p == q {
                            continue;
                        }
                        let (dx, dy) = (p.0 - q.0, p.1 - q.1);
                        let d = (dx * dx + dy * dy) as u64;
                        let better = match best {
                            None => d <= best_sq,
                            Some((bp, bd)) => d < bd || (d == bd && p < bp),
                        };
                        if better {
                            best = Some((p, d));
                            best_sq = d;
                        }
                    }
                }
            }
        }
        best
    }
}

/// Minimal Euclidean norm of a nonzero sum `ξ₁ + … + ξ_l` (even `l`), found by
/// a meet-in-the-middle nearest-opposite search over half-tuple sums.
pub fn min_quasi_correlation(
    e: u64,
    tuple_len: usize,
    budget: &WorkBudget,
) -> Result<QuasiCorrelationReport> {
    check_tuple_len(tuple_len)?;
    if tuple_len % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "quasi-correlations need an even tuple length, got {tuple_len}"
        )));
    }
    let pts = lattice_points(e);
    if pts.is_empty() {
        return Err(Error::NotSumOfTwoSquares(e));
    }
    let half = tuple_len / 2;
    let n = pts.len() as f64;
    budget.check(n.powi(half as i32) * 16.0)?;

    let witnesses = half_sum_witnesses(&pts, half);
    let mut sums: Vec<(i64, i64)> = witnesses.keys().copied().collect();
    sums.sort_unstable();
    let span = 2.0 * half as f64 * (e as f64).sqrt();
    let cell = ((span / (sums.len() as f64).sqrt()).floor() as i64).max(1);
    let grid = BucketGrid::new(&sums, cell);

    // (a, b) with a + b ≠ 0 minimising |a + b|; ties broken lexicographically.
    type Candidate = ((i64, i64), (i64, i64), u64);
    let mut best: Option<Candidate> = None;
    for &a in &sums {
        let target = (-a.0, -a.1);
        let bound = best.map_or(u64::MAX, |(_, _, d)| d);
        if let Some((b, d)) = grid.nearest_excluding(target, bound) {
            let better = match best {
                None => true,
                Some((ba, bb, bd)) => d < bd || (d == bd && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((a, b, d));
            }
        }
    }
    // (ξ, ξ, …) always has a nonzero sum, so a candidate exists.
    let (a, b, d) = best.expect("a nonzero tuple sum always exists");
    assert!(d > 0, "quasi-correlation search returned a zero sum");
    let mut tuple = witnesses[&a].clone();
    tuple.extend_from_slice(&witnesses[&b]);
    Ok(QuasiCorrelationReport {
        e,
        tuple_len,
        min_nonzero_norm_sq: d,
        min_nonzero_norm: (d as f64).sqrt(),
        attaining_tuple: tuple,
    })
}

/// One row of the S′ diagnostic, for tuple length `2l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SPrimeRow {
    pub half_len: usize,
    pub total_solutions: u128,
    pub diagonal_solutions: u128,
    pub off_diagonal_solutions: u128,
    pub predicted_diagonal: u128,
    /// `|S(2l,E) − (2l)!/(2^l l!) N^l| / N^{γl}`
    pub leading_term_excess: f64,
    /// `(S(2l,E) − diagonal) / N^{γl}`
    pub off_diagonal_ratio: f64,
    pub min_quasi_norm: f64,
    /// `min_quasi_norm / E^{scale_exponent}`
    pub quasi_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SPrimeDiagnostic {
    pub e: u64,
    pub n: usize,
    pub gamma: f64,
    pub scale_exponent: f64,
    /// `N(E) / exp(log E / log log E)`; undefined for `E ≤ e` where `log log E ≤ 0`.
    pub divisor_bound_ratio: Option<f64>,
    pub rows: Vec<SPrimeRow>,
}

/// Measures how `E` behaves with respect to the conditions defining S′:
/// off-diagonal correlation excess, quasi-correlation gaps and the divisor bound.
/// No membership verdict is produced.
pub fn s_prime_diagnostic(
    e: u64,
    max_half_len: usize,
    gamma: f64,
    scale_exponent: f64,
    budget: &WorkBudget,
) -> Result<SPrimeDiagnostic> {
    if !is_sum_of_two_squares(e) {
        return Err(Error::NotSumOfTwoSquares(e));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} not in (0, 1)"
        )));
    }
    let n = multiplicity(e);
    let mut rows = Vec::with_capacity(max_half_len);
    for l in 1..=max_half_len {
        let corr = spectral_correlations(e, 2 * l, CorrelationMethod::MeetInMiddle, budget)?;
        let quasi = min_quasi_correlation(e, 2 * l, budget)?;
        let scale = (n as f64).powf(gamma * l as f64);
        let excess = (corr.total_solutions as f64 - corr.predicted_diagonal as f64).abs();
        rows.push(SPrimeRow {
            half_len: l,
            total_solutions: corr.total_solutions,
            diagonal_solutions: corr.diagonal_solutions,
            off_diagonal_solutions: corr.off_diagonal_solutions,
            predicted_diagonal: corr.predicted_diagonal,
            leading_term_excess: excess / scale,
            off_diagonal_ratio: corr.off_diagonal_solutions as f64 / scale,
            min_quasi_norm: quasi.min_nonzero_norm,
            quasi_ratio: quasi.min_nonzero_norm / (e as f64).powf(scale_exponent),
        });
    }
    let loglog = (e as f64).ln().ln();
    let divisor_bound_ratio = (loglog > 0.0).then(|| n as f64 / ((e as f64).ln() / loglog).exp());
    Ok(SPrimeDiagnostic {
        e,
        n,
        gamma,
        scale_exponent,
        divisor_bound_ratio,
        rows,
    })
}
