//! Randomised invariants of the kernels, the linear solves and the iteration map.

mod common;

use proptest::prelude::*;
use segsolve::domain::separation_violation;
use segsolve::iteration::picard_map;
use segsolve::nonlocal::KernelSpec;
use segsolve::*;

fn domain_1d() -> Domain {
    Domain::new(&[-1.0], &[1.0], 0.125).unwrap()
}

fn domain_2d() -> Domain {
    Domain::new(&[0.0, 0.0], &[1.5, 1.0], 0.25).unwrap()
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0f64, n)
}

fn kinds() -> impl Strategy<Value = KernelKind> {
    prop_oneof![Just(KernelKind::Integral), Just(KernelKind::Sup)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_monotone(a in field_strategy(domain_2d().node_count()), bump in field_strategy(domain_2d().node_count()), kind in kinds()) {
        let d = domain_2d();
        let k = KernelSpec::unit(kind, &d).unwrap();
        let u = Field::from_values(a.clone());
        let w = Field::from_values(a.iter().zip(&bump).map(|(x, b)| x + b).collect());
        let hu = apply_kernel(&u, &d, &k);
        let hw = apply_kernel(&w, &d, &k);
        for &x in d.interior() {
            prop_assert!(hu[x] <= hw[x] + 1e-12);
        }
    }

    #[test]
    fn integral_kernel_is_linear(a in field_strategy(domain_1d().node_count()), b in field_strategy(domain_1d().node_count()), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let d = domain_1d();
        let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
        let u = Field::from_values(a);
        let w = Field::from_values(b);
        let lhs = apply_kernel(&u.combine(s, &w, t), &d, &k);
        let hu = apply_kernel(&u, &d, &k);
        let hw = apply_kernel(&w, &d, &k);
        for &x in d.interior() {
            prop_assert!((lhs[x] - (s * hu[x] + t * hw[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_kernel_is_positively_homogeneous_and_shift_equivariant(a in field_strategy(domain_2d().node_count()), s in 0.0..4.0f64, c in -1.0..1.0f64) {
        let d = domain_2d();
        let k = KernelSpec::unit(KernelKind::Sup, &d).unwrap();
        let u = Field::from_values(a);
        let scaled = Field::from_values(u.as_slice().iter().map(|v| s * v + c).collect());
        let hu = apply_kernel(&u, &d, &k);
        let hs = apply_kernel(&scaled, &d, &k);
        for &x in d.interior() {
            prop_assert!((hs[x] - (s * hu[x] + c)).abs() < 1e-12);
        }
    }

    #[test]
    fn offset_count_grows_with_radius(r1 in 0.1..1.0f64, dr in 0.0..1.0f64, dim in 1usize..=2) {
        let h = 0.05;
        let small = ball_offsets(h, r1, dim).unwrap();
        let large = ball_offsets(h, r1 + dr, dim).unwrap();
        prop_assert!(small.len() <= large.len());
        for o in small.offsets() {
            prop_assert!(large.offsets().contains(o));
            prop_assert!(small.offsets().contains(&[-o[0], -o[1]]));
        }
    }

    #[test]
    fn screened_solve_obeys_comparison(c in field_strategy(domain_2d().node_count()), extra in field_strategy(domain_2d().node_count()), g in field_strategy(domain_2d().node_count())) {
        let d = domain_2d();
        let lin = LinearSolverOptions::default();
        let c1 = Field::from_values(c.iter().map(|v| 20.0 * v).collect());
        let c2 = Field::from_values(c.iter().zip(&extra).map(|(v, e)| 20.0 * (v + e)).collect());
        let data = Field::from_values(g);
        let (u1, _) = screened_solve(&c1, &data, &d, &lin).unwrap();
        let (u2, _) = screened_solve(&c2, &data, &d, &lin).unwrap();
        let top = d.collar().iter().map(|&i| data[i]).fold(0.0, f64::max);
        for &x in d.interior() {
            prop_assert!(u2[x] >= -1e-14);
            prop_assert!(u2[x] <= u1[x] + 1e-12);
            prop_assert!(u1[x] <= top + 1e-12);
        }
    }

    #[test]
    fn iteration_map_reverses_order(a in field_strategy(domain_1d().node_count()), bump in field_strategy(domain_1d().node_count()), kind in kinds(), eps in 0.01..1.0f64) {
        let d = domain_1d();
        let data = common::sided_data(&d, |_| 1.0, |_| 0.5);
        let k = KernelSpec::unit(kind, &d).unwrap();
        let lin = LinearSolverOptions::default();
        let low: Vec<Field> = (0..2).map(|s| {
            let mut u = data.species(s).clone();
            for &x in d.interior() { u[x] = a[x]; }
            u
        }).collect();
        let high: Vec<Field> = low.iter().map(|u| {
            let mut w = u.clone();
            for &x in d.interior() { w[x] += bump[x]; }
            w
        }).collect();
        let t_low = picard_map(&low, eps, &d, &data, &k, &lin).unwrap();
        let t_high = picard_map(&high, eps, &d, &data, &k, &lin).unwrap();
        for s in 0..2 {
            for &x in d.interior() {
                prop_assert!(t_high[s][x] <= t_low[s][x] + 1e-12);
            }
        }
    }

    #[test]
    fn separation_check_is_symmetric(xa in -3.0..3.0f64, xb in -3.0..3.0f64, w in 0.1..1.0f64) {
        let d = Domain::new(&[-2.0], &[2.0], 0.125).unwrap();
        let a = Field::from_fn(&d, |x| if (x[0] - xa).abs() <= w { 1.0 } else { 0.0 });
        let b = Field::from_fn(&d, |x| if (x[0] - xb).abs() <= w { 1.0 } else { 0.0 });
        prop_assert_eq!(separation_violation(&a, &b, &d).is_some(), separation_violation(&b, &a, &d).is_some());
    }

    #[test]
    fn grid_dump_round_trips(a in field_strategy(domain_2d().node_count())) {
        let d = domain_2d();
        let u = Field::from_values(a);
        let g = segsolve::output::parse_grid(&segsolve::output::grid_string(&u, &d)).unwrap();
        let pad = d.pad();
        let n1 = d.cells()[1] + 1;
        for (p, v) in g.values.iter().enumerate() {
            let idx = d.lattice_index([p / n1 + pad, p % n1 + pad]);
            prop_assert_eq!(*v, u[idx]);
        }
    }
}
