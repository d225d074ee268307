use std::f64::consts::PI;

use mirror_torus::derived::{compose, evaluate_section};
use mirror_torus::fukaya::{intersections, CoverLine, FukayaObj};
use mirror_torus::mirror::{hom_dimensions, phi_line, phi_morphism};
use mirror_torus::fukaya::associativity_residual;
use mirror_torus::sweep::CaseGen;
use mirror_torus::theta::theta_eval;
use mirror_torus::{ModularParam, ThetaChar, TruncationSpec, C64};
use num_integer::Integer;
use proptest::prelude::*;

fn tau_strategy() -> impl Strategy<Value = ModularParam> {
    (-0.5f64..0.5, 0.5f64..2.0).prop_map(|(re, im)| ModularParam::new(C64::new(re, im)).unwrap())
}

fn z_strategy() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -0.4f64..0.4).prop_map(|(re, im)| C64::new(re, im))
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_quasi_periodicity(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, tau in tau_strategy(), z in z_strategy()) {
        let tr = TruncationSpec::default();
        let ch = ThetaChar::new(c1, c2);
        let t = tau.tau();
        let base = theta_eval(&ch, &tau, z, 0, &tr).unwrap();
        let along_one = theta_eval(&ch, &tau, z + 1.0, 0, &tr).unwrap();
        prop_assert!(close(along_one, (2.0 * PI * I * c1).exp() * base, 1e-10));
        let along_tau = theta_eval(&ch, &tau, z + t, 0, &tr).unwrap();
        let factor = (-PI * I * t - 2.0 * PI * I * (z + c2)).exp();
        prop_assert!(close(along_tau, factor * base, 1e-10));
    }

    #[test]
    fn theta_characteristic_lattice(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, tau in tau_strategy(), z in z_strategy()) {
        let tr = TruncationSpec::default();
        let base = theta_eval(&ThetaChar::new(c1, c2), &tau, z, 0, &tr).unwrap();
        let shifted_c1 = theta_eval(&ThetaChar::new(c1 + 1.0, c2), &tau, z, 0, &tr).unwrap();
        prop_assert!(close(shifted_c1, base, 1e-10));
        let shifted_c2 = theta_eval(&ThetaChar::new(c1, c2 + 1.0), &tau, z, 0, &tr).unwrap();
        prop_assert!(close(shifted_c2, (2.0 * PI * I * c1).exp() * base, 1e-10));
    }

    #[test]
    fn theta_derivative_matches_finite_difference(
        c1 in -0.5f64..0.5, c2 in -0.5f64..0.5, tau in tau_strategy(), z in z_strategy(), order in 0u32..3,
    ) {
        let tr = TruncationSpec::default();
        let ch = ThetaChar::new(c1, c2);
        let h = 1e-5;
        let fp = theta_eval(&ch, &tau, z + h, order, &tr).unwrap();
        let fm = theta_eval(&ch, &tau, z - h, order, &tr).unwrap();
        let exact = theta_eval(&ch, &tau, z, order + 1, &tr).unwrap();
        let scale = 1.0 + theta_eval(&ch, &tau, z, order, &tr).unwrap().norm();
        prop_assert!(close((fp - fm) / (2.0 * h), exact, 1e-5 * scale));
    }

    #[test]
    fn composition_is_pointwise_product(seed in any::<u64>(), z in z_strategy()) {
        let tr = TruncationSpec::default();
        let mut g = CaseGen::new(seed, 0);
        let tau = g.tau();
        let c = g.chain(tau, 3, 2);
        let s = g.morphism(&c[0], &c[1]).unwrap();
        let t = g.morphism(&c[1], &c[2]).unwrap();
        let lhs = evaluate_section(&compose(&s, &t, &tr).unwrap(), z, &tr).unwrap();
        let rhs = evaluate_section(&t, z, &tr).unwrap().try_mul(&evaluate_section(&s, z, &tr).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn composition_is_associative_on_both_sides(seed in any::<u64>()) {
        let tr = TruncationSpec::default();
        let mut g = CaseGen::new(seed, 1);
        let tau = g.tau();
        let c = g.chain(tau, 4, 2);
        let ms: Vec<_> = (0..3).map(|i| g.morphism(&c[i], &c[i + 1]).unwrap()).collect();
        let left = compose(&compose(&ms[0], &ms[1], &tr).unwrap(), &ms[2], &tr).unwrap();
        let right = compose(&ms[0], &compose(&ms[1], &ms[2], &tr).unwrap(), &tr).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-9);
        let us: Vec<_> = ms.iter().map(|m| phi_morphism(m).unwrap()).collect();
        prop_assert!(associativity_residual(&us[0], &us[1], &us[2], &tr).unwrap() <= 1e-8);
    }

    #[test]
    fn hom_dimension_count_law(seed in any::<u64>(), n1 in -4i64..5, n2 in -4i64..5) {
        let mut g = CaseGen::new(seed, 2);
        let tau = g.tau();
        let o1 = g.line(tau, n1, 3);
        let o2 = g.line(tau, n2, 3);
        let (d, f) = hom_dimensions(&o1, &o2).unwrap();
        prop_assert_eq!(d, f);
        if n1 < n2 {
            prop_assert_eq!(d, (n2 - n1) as usize * o1.rank() * o2.rank());
        } else if n1 > n2 {
            prop_assert_eq!(d, 0);
        }
    }

    #[test]
    fn general_intersections_lie_on_both_lines(seed in any::<u64>(), r1 in 1u32..4, r2 in 1u32..4, e1 in -3i64..5, e2 in -3i64..5) {
        let det = r1 as i64 * e2 - r2 as i64 * e1;
        prop_assume!(det != 0);
        let mut g = CaseGen::new(seed, 3);
        let tau = g.tau();
        let l1 = FukayaObj::Cover(CoverLine { r: r1, inner: phi_line(&g.line(tau.scaled(r1), e1, 1)) });
        let l2 = FukayaObj::Cover(CoverLine { r: r2, inner: phi_line(&g.line(tau.scaled(r2), e2, 1)) });
        let pts = intersections(&l1, &l2).unwrap();
        prop_assert_eq!(pts.len(), det.unsigned_abs() as usize);
        for p in &pts {
            for l in [&l1, &l2] {
                let (dx, dy) = l.direction();
                let (bx, by) = l.base_point();
                // (x, y) lies on the geodesic iff the cross product with the
                // direction is a multiple of gcd(dx, dy)
                let cross = (dy as f64 * (p.coords.0 - bx) - dx as f64 * (p.coords.1 - by)) / dx.gcd(&dy) as f64;
                prop_assert!((cross - cross.round()).abs() < 1e-9, "point {:?} off line {:?}", p.coords, l.direction());
            }
        }
    }
}
