//! Library results checked against independent dense and brute-force computations.

mod common;

use common::*;
use segsolve::iteration::{family_with_interior, picard_map, FixedPointOptions};
use segsolve::nonlocal::KernelSpec;
use segsolve::segregation::{dirichlet_energy, interaction_integral};
use segsolve::*;

#[test]
fn banded_solve_matches_dense_lu() {
    for (d, shift) in [
        (Domain::new(&[-2.0], &[2.0], 1.0 / 16.0).unwrap(), 3.0),
        (Domain::new(&[0.0, 0.0], &[2.0, 1.5], 0.125).unwrap(), 40.0),
    ] {
        let data = Field::from_fn(&d, |x| 1.0 + x[0].abs() + 0.5 * x.get(1).copied().unwrap_or(0.0));
        let c = Field::from_fn(&d, |x| shift * (1.0 + x[0].sin().powi(2)));
        let dense = dense_screened(&d, &c, &data);
        for method in [SolverMethod::Direct, SolverMethod::Cg] {
            let opts = LinearSolverOptions { method, ..LinearSolverOptions::default() };
            let (u, _) = screened_solve(&c, &data, &d, &opts).unwrap();
            let err = max_abs_diff(&[u], std::slice::from_ref(&dense), &d);
            assert!(err < 1e-9, "{method:?}: {err}");
        }
    }
}

#[test]
fn kernel_matches_brute_force_ball() {
    for d in [Domain::new(&[-2.0], &[2.0], 0.125).unwrap(), Domain::new(&[0.0, 0.0], &[2.0, 2.0], 0.25).unwrap()] {
        let g = Geometry::new(&d);
        let u = Field::from_fn(&d, |x| (3.0 * x[0]).cos().abs() + x.get(1).map_or(0.0, |y| y * y));
        for kind in [KernelKind::Integral, KernelKind::Sup] {
            let k = KernelSpec::unit(kind, &d).unwrap();
            let hu = apply_kernel(&u, &d, &k);
            for (p, &x) in g.interior.iter().enumerate() {
                let (want, _) = g.kernel(&u, p, kind);
                assert!((hu[x] - want).abs() < 1e-12 * (1.0 + want.abs()), "{kind:?} at {x}: {} vs {want}", hu[x]);
            }
        }
    }
}

#[test]
fn interaction_matches_double_sum() {
    let (d, data) = standard_1d(1.0 / 16.0);
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let sol = run_monotone(0.05, &d, &data, &k, &MonotoneOptions::default()).unwrap();
    let g = Geometry::new(&d);
    let lib = interaction_integral(&sol.fields[0], &sol.fields[1], &d, &k);
    let brute = g.interaction_double_sum(&sol.fields[0], &sol.fields[1]);
    assert!((lib - brute).abs() < 1e-12 * brute.abs().max(1e-300), "{lib} vs {brute}");

    let (d2, data2) = square_2d(0.25);
    let k2 = KernelSpec::unit(KernelKind::Integral, &d2).unwrap();
    let u = harmonic_extension(data2.species(0), &d2, &LinearSolverOptions::default()).unwrap();
    let v = harmonic_extension(data2.species(1), &d2, &LinearSolverOptions::default()).unwrap();
    let g2 = Geometry::new(&d2);
    let lib = interaction_integral(&u, &v, &d2, &k2);
    let brute = g2.interaction_double_sum(&u, &v);
    assert!((lib - brute).abs() < 1e-12 * brute, "{lib} vs {brute}");
}

#[test]
fn dirichlet_energy_of_harmonic_matches_flux() {
    // For discrete harmonic u, Σ|∇u|² h^d equals the boundary term Σ u_c (u_c - u_i) h^{d-2}.
    let (d, data) = square_2d(0.25);
    let u = harmonic_extension(data.species(0), &d, &LinearSolverOptions::default()).unwrap();
    let g = Geometry::new(&d);
    let mut boundary = 0.0;
    for (p, &x) in g.interior.iter().enumerate() {
        for &nb in &g.neighbours[p] {
            if !g.position.contains_key(&nb) {
                boundary += u[nb] * (u[nb] - u[x]);
            }
        }
    }
    let e = dirichlet_energy(&u, &d);
    assert!((e - boundary).abs() < 1e-9 * e, "{e} vs {boundary}");
}

#[test]
fn first_step_matches_dense_oracle() {
    // One frozen-coefficient step from the harmonic extension, re-solved densely.
    let (d, data) = standard_1d(0.25);
    let lin = LinearSolverOptions::default();
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let u0: Vec<Field> = data.fields().iter().map(|p| harmonic_extension(p, &d, &lin).unwrap()).collect();
    let u1 = picard_map(&u0, 0.1, &d, &data, &k, &lin).unwrap();
    let g = Geometry::new(&d);
    for s in 0..2 {
        let mut c = Field::zeros(&d);
        for (p, &x) in g.interior.iter().enumerate() {
            c[x] = g.kernel(&u0[1 - s], p, KernelKind::Integral).0 / 0.1;
        }
        let dense = dense_screened(&d, &c, data.species(s));
        assert!(max_abs_diff(&[u1[s].clone()], &[dense], &d) < 1e-12);
        for &x in d.interior() {
            assert!(u1[s][x] <= u0[s][x] + 1e-14);
        }
    }
}

fn newton_case(d: &Domain, data: &BoundaryData, eps: f64, kind: KernelKind) {
    let k = KernelSpec::unit(kind, d).unwrap();
    let newton = newton_oracle(d, data, eps, kind);
    assert!(newton.residual * d.h() * d.h() < 1e-12, "newton residual {}", newton.residual);
    let min = newton.fields.iter().flat_map(|u| d.interior().iter().map(move |&x| u[x])).fold(f64::INFINITY, f64::min);
    assert!(min > -1e-12, "newton converged to a sign-changing solution");
    let mono = run_monotone(eps, d, data, &k, &MonotoneOptions::default()).unwrap();
    let err = max_abs_diff(&mono.fields, &newton.fields, d);
    assert!(err <= 1e-6, "{kind:?} eps={eps}: monotone vs newton {err:e}");
}

#[test]
fn monotone_matches_newton_integral_1d() {
    let (d, data) = standard_1d(0.125);
    newton_case(&d, &data, 0.05, KernelKind::Integral);
}

#[test]
fn monotone_matches_newton_sup_1d() {
    let (d, data) = standard_1d(1.0 / 16.0);
    newton_case(&d, &data, 0.05, KernelKind::Sup);
}

#[test]
fn monotone_matches_newton_ramp_data() {
    let d = Domain::new(&[-2.0], &[2.0], 1.0 / 32.0).unwrap();
    let data = sided_data(&d, |x| 1.0 + (-2.0 - x[0]), |_| 2.0);
    newton_case(&d, &data, 0.01, KernelKind::Integral);
}

#[test]
fn fixed_point_matches_monotone_from_above() {
    let (d, data) = standard_1d(1.0 / 16.0);
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let mono = run_monotone(0.02, &d, &data, &k, &MonotoneOptions::default()).unwrap();
    let init = family_with_interior(&data, &d, |_, _| 5.0);
    let fp = solve_fixed_point(0.02, &d, &data, &k, init, 0.5, &FixedPointOptions::default()).unwrap();
    assert!(max_abs_diff(&mono.fields, &fp.fields, &d) < 1e-8);
}
