//! Bessel functions `J₀`, `J₁` of real argument.
//!
//! Power series on `[0, 12]`, Hankel asymptotic expansion beyond.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 12.0;

/// `J_n(x)` for `n ∈ {0, 1}` and `x ≥ 0`. Negative `x` uses the parity
/// `J_n(−x) = (−1)^n J_n(x)`.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    assert!(order <= 1, "only orders 0 and 1 are supported");
    if x < 0.0 {
        let v = bessel_j(order, -x);
        return if order == 1 { -v } else { v };
    }
    if x <= SERIES_LIMIT {
        series(order, x)
    } else {
        hankel(order, x)
    }
}

pub fn j0(x: f64) -> f64 {
    bessel_j(0, x)
}

pub fn j1(x: f64) -> f64 {
    bessel_j(1, x)
}

/// `Σ_k (−1)^k (x/2)^{2k+n} / (k! (k+n)!)`. Terms peak near `k ≈ x/2`, where
/// they reach about `e^x / (2πx)`, so at `x = 12` cancellation costs roughly
/// five digits out of sixteen.
fn series(order: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = if order == 0 { 1.0 } else { h };
    let mut sum = term;
    let n = order as f64;
    for k in 1..200 {
        let k = k as f64;
        term *= q / (k * (k + n));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > h {
            break;
        }
    }
    sum
}

/// `J_n(x) ≈ √(2/(πx)) (P cos χ − Q sin χ)`, `χ = x − (2n+1)π/4`.
fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let z = 8.0 * x;
    // P = Σ (−1)^k a_{2k} / z^{2k}, Q = Σ (−1)^k a_{2k+1} / z^{2k+1},
    // a_m = Π_{j=1..m} (μ − (2j−1)²) / (m! z^m).
    let (mut p, mut q) = (1.0, 0.0);
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for m in 1..40 {
        let j = (2 * m - 1) as f64;
        a *= (mu - j * j) / (m as f64 * z);
        if a.abs() > prev {
            break;
        }
        prev = a.abs();
        // signs: m = 1 → Q +, m = 2 → P −, m = 3 → Q −, m = 4 → P +, …
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if m % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (2.0 * order as f64 + 1.0) * PI / 4.0;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Mean of `e(⟨a, x⟩)` over a disc of radius `s`, as a function of `|a|`:
/// `2 J₁(2π s |a|) / (2π s |a|)`, equal to 1 at `a = 0`.
pub fn ball_fourier_factor(a_norm: f64, s: f64) -> f64 {
    let t = 2.0 * PI * s * a_norm;
    if t == 0.0 {
        return 1.0;
    }
    if t < 1e-4 {
        // 1 − t²/8 + t⁴/192
        let t2 = t * t;
        return 1.0 - t2 / 8.0 + t2 * t2 / 192.0;
    }
    2.0 * j1(t) / t
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_n(x) = (1/π) ∫₀^π cos(nτ − x sin τ) dτ`, by the trapezoid rule, which
    /// converges geometrically for this periodic integrand.
    fn integral_oracle(n: u32, x: f64) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
    }

    #[test]
    fn first_zero_of_j0() {
        assert!(j0(2.404825557695773).abs() <= 1e-9);
    }

    #[test]
    fn matches_integral_representation() {
        for i in 0..=400 {
            let x = i as f64 * 0.03;
            for n in 0..=1 {
                let d = (bessel_j(n, x) - integral_oracle(n, x)).abs();
                assert!(d <= 1e-10, "J{n}({x}) off by {d}");
            }
        }
        for i in 0..200 {
            let x = 12.0 + i as f64 * 0.437;
            for n in 0..=1 {
                let exact = integral_oracle(n, x);
                let d = (bessel_j(n, x) - exact).abs();
                // relative error, guarded near zeros by the envelope √(2/πx)
                let scale = exact.abs().max(1e-3 * (2.0 / (PI * x)).sqrt());
                assert!(d / scale <= 1e-8, "J{n}({x}) rel err {}", d / scale);
            }
        }
    }

    #[test]
    fn continuity_at_switch() {
        for n in 0..=1 {
            let a = series(n, SERIES_LIMIT);
            let b = hankel(n, SERIES_LIMIT);
            assert!((a - b).abs() < 1e-10, "order {n}: {a} vs {b}");
        }
    }

    #[test]
    fn ball_factor_matches_disc_quadrature() {
        // mean of cos(2π a x₁) over the unit disc, polar midpoint rule
        let (a, s) = (3.0, 1.0);
        let (nr, nt) = (2000, 2000);
        let mut acc = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64 * s;
            let mut ring = 0.0;
            for j in 0..nt {
                let t = (j as f64 + 0.5) / nt as f64 * 2.0 * PI;
                ring += (2.0 * PI * a * r * t.cos()).cos();
            }
            acc += ring / nt as f64 * 2.0 * PI * r * (s / nr as f64);
        }
        let mean = acc / (PI * s * s);
        assert!((ball_fourier_factor(a, s) - mean).abs() <= 1e-6);
        assert_eq!(ball_fourier_factor(0.0, 0.3), 1.0);
        assert!(ball_fourier_factor(100.0 / (2.0 * PI), 1.0).abs() <= 0.01);
        assert!(ball_fourier_factor(100.0, 1.0).abs() <= 0.01);
    }
}
