use num_complex::Complex64;
use proptest::prelude::*;

use toral_nodal::arithmetic::{
    lattice_points, min_quasi_correlation, spectral_correlations, CorrelationMethod, Frequency,
    WorkBudget,
};
use toral_nodal::bessel::ball_fourier_factor;
use toral_nodal::derand::{gaussian_moment, ArcDecomposition, ArcOrder, ArcPartition};
use toral_nodal::eigenfunction::{build_flat_random, EigenfunctionSpec};
use toral_nodal::measure::{Atom, SpectralMeasure};
use toral_nodal::nodal::{count_nodal_domains, sample_spec, Region};

/// Values of `E ≤ 5000` with at least 8 lattice points.
fn rich_e() -> impl Strategy<Value = u64> {
    (1u64..5000).prop_filter("needs N ≥ 8", |&e| lattice_points(e).len() >= 8)
}

fn negated(spec: &EigenfunctionSpec) -> EigenfunctionSpec {
    EigenfunctionSpec::new(
        spec.e(),
        spec.points()
            .iter()
            .copied()
            .zip(spec.coefficients().iter().map(|a| -a)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_is_closed_under_the_square_symmetries(e in 1u64..20_000) {
        let pts = lattice_points(e);
        prop_assert_eq!(pts.len() % 4, 0);
        for p in &pts {
            for q in [
                Frequency::new(-p.y, p.x),
                Frequency::new(p.y, p.x),
                Frequency::new(-p.x, p.y),
            ] {
                prop_assert!(pts.contains(&q));
            }
        }
    }

    #[test]
    fn correlations_split_into_diagonal_and_rest(e in rich_e()) {
        let r = spectral_correlations(e, 4, CorrelationMethod::MeetInMiddle, &WorkBudget::default()).unwrap();
        prop_assert_eq!(r.total_solutions, r.diagonal_solutions + r.off_diagonal_solutions);
        // four points on a circle sum to zero only in antipodal pairs
        let n = r.n as u128;
        prop_assert_eq!(r.off_diagonal_solutions, 0);
        prop_assert_eq!(r.diagonal_solutions, 3 * n * (n - 1));
        prop_assert!(r.diagonal_solutions <= r.predicted_diagonal);
        let odd = spectral_correlations(e, 5, CorrelationMethod::MeetInMiddle, &WorkBudget::default()).unwrap();
        prop_assert_eq!(odd.total_solutions, 0);
    }

    #[test]
    fn quasi_minimum_is_invariant_under_rotation(e in rich_e()) {
        let r = min_quasi_correlation(e, 4, &WorkBudget::default()).unwrap();
        // the quarter turn permutes the lattice points, so it maps the
        // attaining tuple to one with the same sum norm
        let (x, y) = r.attaining_tuple.iter().fold((0i64, 0i64), |(x, y), p| (x - p.y, y + p.x));
        prop_assert_eq!((x * x + y * y) as u64, r.min_nonzero_norm_sq);
        prop_assert!(r.min_nonzero_norm_sq >= 1);
        // parity: a sum of four points has x + y ≡ 0 (mod 2)
        prop_assert_eq!((x + y).rem_euclid(2), 0);
    }

    #[test]
    fn negation_swaps_signs_of_domains(seed in 0u64..1000, cx in 0.0f64..1.0, cy in 0.0f64..1.0) {
        let spec = build_flat_random(325, seed).unwrap();
        let region = Region::disc([cx, cy], 0.2);
        let h = 1.0 / 400.0;
        let a = count_nodal_domains(&sample_spec(&spec, &region, h).unwrap(), &region).unwrap();
        let b = count_nodal_domains(&sample_spec(&negated(&spec), &region, h).unwrap(), &region).unwrap();
        prop_assert_eq!(a.domains_inside, b.domains_inside);
        prop_assert_eq!(a.positive_inside, b.negative_inside);
        prop_assert_eq!(a.negative_inside, b.positive_inside);
        prop_assert!((a.nodal_length - b.nodal_length).abs() < 1e-9);
    }

    #[test]
    fn counts_are_periodic(seed in 0u64..1000, cx in 0.0f64..1.0, cy in 0.0f64..1.0, kx in -2i32..3, ky in -2i32..3) {
        let spec = build_flat_random(65, seed).unwrap();
        // spacing 1/n keeps the sample lattice invariant under integer shifts
        let h = 1.0 / 200.0;
        let r1 = Region::disc([cx, cy], 0.3);
        let r2 = Region::disc([cx + kx as f64, cy + ky as f64], 0.3);
        let a = count_nodal_domains(&sample_spec(&spec, &r1, h).unwrap(), &r1).unwrap();
        let b = count_nodal_domains(&sample_spec(&spec, &r2, h).unwrap(), &r2).unwrap();
        prop_assert_eq!(a.domains_inside, b.domains_inside);
        prop_assert!((a.nodal_length - b.nodal_length).abs() < 1e-6 * (1.0 + a.nodal_length));
    }

    #[test]
    fn parseval_on_the_torus(e in (1u64..200).prop_filter("sum of two squares", |&e| !lattice_points(e).is_empty()), seed in 0u64..1000) {
        let spec = build_flat_random(e, seed).unwrap();
        // the trapezoid rule is exact for |f|² once n exceeds its largest frequency
        let n = 64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += spec.value([i as f64 / n as f64, j as f64 / n as f64]).powi(2);
            }
        }
        prop_assert!((acc / (n * n) as f64 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_even_and_bounded(lx in -3.0f64..3.0, ly in -3.0f64..3.0, angle in 0.0f64..std::f64::consts::PI, w in 0.05f64..0.95) {
        let tilted = SpectralMeasure::atomic(vec![
            Atom { angle, mass: w / 2.0 },
            Atom { angle: angle + std::f64::consts::PI, mass: w / 2.0 },
            Atom { angle: angle + 1.0, mass: (1.0 - w) / 2.0 },
            Atom { angle: angle + 1.0 + std::f64::consts::PI, mass: (1.0 - w) / 2.0 },
        ]).unwrap();
        for m in [SpectralMeasure::nu(), SpectralMeasure::nu_tilde(), SpectralMeasure::lebesgue(), tilted] {
            let c = m.covariance([lx, ly]);
            prop_assert!((c - m.covariance([-lx, -ly])).abs() < 1e-12);
            prop_assert!(c.abs() <= 1.0 + 1e-12);
            prop_assert!((m.covariance([0.0, 0.0]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arc_coefficients_are_conjugate_across_antipodes(seed in 0u64..1000, x in 0.0f64..1.0, y in 0.0f64..1.0, k in 2usize..12) {
        let spec = build_flat_random(1105, seed).unwrap();
        let part = ArcPartition::new(k).unwrap();
        let masses = part.masses(&spec.spectral_measure());
        let kset: Vec<usize> = (0..part.len()).filter(|&i| masses[i] > 0.0).collect();
        let d = ArcDecomposition::new(&spec, &part, &kset).unwrap();
        let b = d.b([x, y]);
        for (slot, &arc) in d.arcs().iter().enumerate() {
            let partner = d.arcs().iter().position(|&a| a == part.antipode(arc)).unwrap();
            prop_assert!((b[slot] - b[partner].conj()).norm() < 1e-9);
        }
        // the heavy-arc sum at full resolution is f itself
        let total: f64 = b.iter().zip(d.masses()).map(|(bk, m)| (bk * m.sqrt()).re).sum();
        prop_assert!((total - spec.value([x, y])).abs() < 1e-9);
    }

    #[test]
    fn gaussian_moment_ignores_antipodal_relabelling(k in 2usize..10, arc in 0usize..20, r in 0u32..4, s in 0u32..4) {
        let part = ArcPartition::new(k).unwrap();
        let arc = arc % part.len();
        let a = gaussian_moment(&part, &[ArcOrder { arc, r, s }]);
        let b = gaussian_moment(&part, &[ArcOrder { arc: part.antipode(arc), r: s, s: r }]);
        prop_assert_eq!(a, b);
        let expected = if r == s { (1..=r).map(f64::from).product() } else { 0.0 };
        prop_assert_eq!(a, expected);
    }

    #[test]
    fn ball_factor_is_bounded(a in 0.0f64..500.0, s in 1e-4f64..1.0) {
        let v = ball_fourier_factor(a, s);
        prop_assert!(v.abs() <= 1.0 + 1e-12);
        prop_assert!(v <= ball_fourier_factor(0.0, s));
    }
}

#[test]
fn cosine_has_no_closed_domains() {
    let h = Complex64::new(0.5, 0.0);
    let spec =
        EigenfunctionSpec::unnormalized(1, [(Frequency::new(1, 0), h), (Frequency::new(-1, 0), h)])
            .unwrap();
    let region = Region::disc([0.5, 0.5], 0.45);
    let rep = count_nodal_domains(&sample_spec(&spec, &region, 0.01).unwrap(), &region).unwrap();
    assert_eq!(rep.domains_inside, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn growing_the_disc_keeps_inner_domains(seed in 0u64..1000, s in 0.1f64..0.25, extra in 0.0f64..0.1) {
        let spec = build_flat_random(325, seed).unwrap();
        let h = 1.0 / 400.0;
        let big = Region::disc([0.4, 0.6], s + extra);
        let field = sample_spec(&spec, &big, h).unwrap();
        let small = count_nodal_domains(&field, &Region::disc([0.4, 0.6], s)).unwrap();
        let large = count_nodal_domains(&field, &big).unwrap();
        prop_assert!(small.domains_inside <= large.domains_inside + large.domains_touching_boundary);
    }
}
