//! Acceptance suite: one test per criterion, each printing a single
//! `ACCEPTANCE <id> PASS|FAIL` line with the measured values and the bound
//! it is held to, then asserting the outcome.
//!
//! Lines go straight to stderr so they show up even for passing tests.

mod common;

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use segsolve::iteration::{family_with_interior, run_monotone_traced, sandwich_check, FixedPointOptions};
use segsolve::nonlocal::KernelSpec;
use segsolve::parabolic::{evolve, EvolveOptions, ParabolicState};
use segsolve::segregation::{
    boundary_set, decay_profile, epsilon_sweep, free_boundary_1d, support_distance, SweepOptions, SweepReport,
};
use segsolve::*;

const SWEEP: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("ACCEPTANCE {id:>2} {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn sweep(d: &Domain, data: &BoundaryData, kind: KernelKind) -> SweepReport {
    let k = KernelSpec::unit(kind, d).unwrap();
    epsilon_sweep(d, data, &k, &SWEEP, &SweepOptions::default()).unwrap()
}

#[test]
fn c01_monotone_interleaving() {
    let start = Instant::now();
    let (d, data) = standard_1d(1.0 / 32.0);
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let (sol, state) = run_monotone_traced(0.05, &d, &data, &k, &MonotoneOptions::default()).unwrap();
    let audit = audit_interleaving(state.history(), &d, 1e-7);
    let secs = start.elapsed().as_secs_f64();
    let pass = audit.violations.is_empty() && audit.iterates_checked >= 12 && secs < 10.0;
    verdict(
        1,
        "monotone interleaving",
        pass,
        &format!(
            "violations={} (max {:.1e}) over {} iterates, {} outer steps, {secs:.2}s; need 0 beyond 1e-7, >=12 iterates, <10s",
            audit.violations.len(),
            audit.max_violation,
            audit.iterates_checked,
            sol.iterations
        ),
    );
}

#[test]
fn c02_newton_oracle() {
    let start = Instant::now();
    let ramp_1d = Domain::new(&[-2.0], &[2.0], 1.0 / 32.0).unwrap();
    let square = Domain::new(&[0.0, 0.0], &[2.0, 2.0], 0.125).unwrap();
    let cases = vec![
        ("standard 1d h=1/8 eps=0.05", standard_1d(0.125).0, standard_1d(0.125).1, 0.05),
        ("ramp 1d h=1/32 eps=0.01", ramp_1d.clone(), sided_data(&ramp_1d, |x| 1.0 + (-2.0 - x[0]), |_| 2.0), 0.01),
        (
            "2d (0,2)^2 h=1/8 eps=0.1",
            square.clone(),
            sided_data(&square, |x| 1.0 + 0.5 * (x[1] - 1.0).abs(), |x| 1.0 + 0.25 * x[1]),
            0.1,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, d, data, eps) in &cases {
        assert!(d.interior().len() <= 500);
        let k = KernelSpec::unit(KernelKind::Integral, d).unwrap();
        let mono = run_monotone(*eps, d, data, &k, &MonotoneOptions::default()).unwrap();
        let newton = newton_oracle(d, data, *eps, KernelKind::Integral);
        let err = max_abs_diff(&mono.fields, &newton.fields, d);
        worst = worst.max(err);
        parts.push(format!("{name} ({} unknowns/species): {err:.1e}", d.interior().len()));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "Newton oracle equivalence",
        worst <= 1e-6 && secs < 60.0,
        &format!("{}; {secs:.2}s; need <=1e-6 L-inf, <60s", parts.join("; ")),
    );
}

#[test]
fn c03_uniqueness_sandwich() {
    let start = Instant::now();
    let lin = LinearSolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut sandwich = true;
    let mut parts = Vec::new();
    for (name, (d, data)) in [("1d h=1/32", standard_1d(1.0 / 32.0)), ("2d (0,3)^2 h=0.1", square_2d(0.1))] {
        let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
        let mono = run_monotone(0.05, &d, &data, &k, &MonotoneOptions::default()).unwrap();
        let harmonic: Vec<Field> = data.fields().iter().map(|p| harmonic_extension(p, &d, &lin).unwrap()).collect();
        let twice = family_with_interior(&data, &d, |s, x| 2.0 * harmonic[s][x]);
        let uniform = family_with_interior(&data, &d, |_, _| data.max_value());
        for (init_name, init) in [("harmonic", harmonic.clone()), ("2x harmonic", twice), ("uniform", uniform)] {
            let fp = solve_fixed_point(0.05, &d, &data, &k, init, 0.5, &FixedPointOptions::default()).unwrap();
            let err = max_abs_diff(&fp.fields, &mono.fields, &d);
            sandwich &= sandwich_check(&fp.fields, &mono.odd, &mono.even, &d, 1e-7).holds;
            worst = worst.max(err);
            parts.push(format!("{name} {init_name}: {err:.1e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "uniqueness sandwich",
        worst <= 1e-6 && secs < 300.0,
        &format!("{}; sandwich holds={sandwich}; {secs:.2}s; need <=1e-6 L-inf, <300s", parts.join("; ")),
    );
}

#[test]
fn c04_uniform_bounds() {
    let start = Instant::now();
    let (d, data) = standard_1d(1.0 / 32.0);
    let report = sweep(&d, &data, KernelKind::Integral);
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for s in 0..2 {
        series.push((format!("flux{s}"), report.rows.iter().map(|r| r.max_flux[s]).collect()));
        series.push((format!("energy{s}"), report.rows.iter().map(|r| r.energy[s]).collect()));
    }
    series.push(("I12/eps".into(), report.rows.iter().map(|r| r.interaction[0][1] / r.eps).collect()));
    let mut pass = report.rows.len() == SWEEP.len();
    let mut parts = Vec::new();
    for (name, v) in &series {
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x / v[0]), hi.max(x / v[0])));
        pass &= lo >= 0.5 && hi <= 2.0;
        parts.push(format!("{name} ratio [{lo:.3}, {hi:.3}]"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(
        4,
        "uniform bounds over eps sweep",
        pass,
        &format!("{}; {secs:.2}s; need ratios to eps=1e-1 within [0.5, 2], <120s", parts.join(", ")),
    );
}

#[test]
fn c05_segregation_at_distance_one() {
    let theta = 1e-3;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, h, width, (d, data)) in [
        ("1d", 1.0 / 32.0, 4.0, standard_1d(1.0 / 32.0)),
        ("2d", 0.1, 6.0, square_2d(0.1)),
    ] {
        for kind in [KernelKind::Integral, KernelKind::Sup] {
            let report = sweep(&d, &data, kind);
            let last = report.rows.last().unwrap();
            let sol = last.solution.as_ref().expect("eps=1e-4 solved");
            let dist = support_distance(&sol.fields[0], &sol.fields[1], &d, theta).unwrap();
            let (lo, hi) = (1.0 - width * h, 1.0 + width * h);
            let ok = (lo - 1e-12..=hi + 1e-12).contains(&dist);
            pass &= ok;
            parts.push(format!("{label} {kind:?}: {dist:.4} in [{lo:.4}, {hi:.4}] {}", if ok { "ok" } else { "out" }));
        }
    }
    verdict(5, "segregation at distance one (eps=1e-4, theta=1e-3)", pass, &parts.join("; "));
}

#[test]
fn c06_exponential_decay() {
    let (d, data) = standard_1d(1.0 / 32.0);
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let gamma = boundary_set(data.species(0), &d, 0.5).unwrap();
    let mut logs = Vec::new();
    for eps in SWEEP {
        let sol = run_monotone(eps, &d, &data, &k, &MonotoneOptions::default()).unwrap();
        let p = decay_profile(&sol.fields[1], &d, &gamma, &[0.5]);
        logs.push((1.0 / eps.sqrt(), p[0].sup.ln()));
    }
    let diffs: Vec<f64> = logs.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let slopes: Vec<f64> = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let pass = diffs.iter().all(|x| x.is_finite()) && diffs.windows(2).all(|w| w[1] < w[0]);
    verdict(
        6,
        "exponential decay at r=1/2",
        pass,
        &format!(
            "log sup v = {:?}; differences {:?} (per unit 1/sqrt(eps): {:?}); need strictly decreasing differences",
            logs.iter().map(|l| format!("{:.3}", l.1)).collect::<Vec<_>>(),
            diffs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
            slopes.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn c07_free_boundary_1d() {
    let start = Instant::now();
    let theta = 1e-3;
    let fb = |eps: f64, h: f64| {
        let (d, data) = standard_1d(h);
        let k = KernelSpec::unit(KernelKind::Sup, &d).unwrap();
        let sol = run_monotone(eps, &d, &data, &k, &MonotoneOptions::default()).unwrap();
        free_boundary_1d(&sol, &d, theta).unwrap()
    };
    let coarse = fb(1e-4, 1.0 / 64.0);
    let fine = fb(1e-4, 1.0 / 128.0);
    let ratio = coarse.affinity_defect / fine.affinity_defect;
    let seq: Vec<f64> = [(1e-3, 1.0 / 32.0), (1e-4, 1.0 / 64.0), (1e-5, 1.0 / 128.0)]
        .iter()
        .map(|&(e, h)| fb(e, h).residual)
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = (3.0..=5.0).contains(&ratio) && seq.windows(2).all(|w| w[1] < w[0]) && secs < 300.0;
    verdict(
        7,
        "1d free-boundary condition",
        pass,
        &format!(
            "affinity defect {:.3e} (h=1/64) / {:.3e} (h=1/128) = {ratio:.3}; |u'+v'| along refinement {:?}; {secs:.2}s; need ratio in [3, 5], strictly decreasing, <300s",
            coarse.affinity_defect,
            fine.affinity_defect,
            seq.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn c08_parabolic_consistency() {
    let start = Instant::now();
    let (d, data) = standard_1d(1.0 / 32.0);
    let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
    let lin = LinearSolverOptions::default();
    let elliptic = run_monotone(0.1, &d, &data, &k, &MonotoneOptions::default()).unwrap();
    let init: Vec<Field> = data.fields().iter().map(|p| harmonic_extension(p, &d, &lin).unwrap()).collect();
    let state = ParabolicState::new(init, &data, &d, d.h() * d.h()).unwrap();
    let (state, trace) = evolve(state, 0.1, &d, &data, &k, &EvolveOptions::default()).unwrap();
    let diff = max_abs_diff(&state.fields, &elliptic.fields, &d);
    let defect = trace.iter().map(|r| r.mass_defect).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "parabolic consistency",
        diff <= 1e-5 && defect <= 1e-9 && secs < 120.0,
        &format!(
            "{} steps to t={:.3}, |u(T)-u_elliptic|={diff:.2e}, max mass defect {defect:.2e}, {secs:.2}s; need <=1e-5, <=1e-9, <120s",
            trace.len(),
            state.t
        ),
    );
}

#[test]
fn c09_screened_solve_convergence() {
    let k2: f64 = 4.0;
    let kk = k2.sqrt();
    let error = |h: f64| {
        let d = Domain::new(&[-1.0], &[1.0], h).unwrap();
        let exact = Field::from_fn(&d, |x| (kk * x[0]).cosh() / kk.cosh());
        let c = Field::from_fn(&d, |_| k2);
        let (u, _) = screened_solve(&c, &exact, &d, &LinearSolverOptions::default()).unwrap();
        d.interior().iter().map(|&i| (u[i] - exact[i]).abs()).fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0].iter().map(|&h| error(h)).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    verdict(
        9,
        "screened-solve mesh convergence (cosh)",
        pass,
        &format!(
            "L-inf errors {:?} at h=1/8,1/16,1/32; ratios {:?}; need each in [3.5, 4.5]",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn c10_determinism() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut names: Vec<_> = std::fs::read_dir(&configs).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let mut pass = !names.is_empty();
    let mut parts = Vec::new();
    for cfg in &names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(cfg).unwrap();
        let command = segsolve::config::parse_config(&text).unwrap().command;
        let command = serde_json::to_value(command).unwrap().as_str().unwrap().to_string();
        let mut outs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "4")] {
            let out = tmp.path().join(format!("{stem}_{run}"));
            let output = Command::new(env!("CARGO_BIN_EXE_segsolve"))
                .env("SEGSOLVE_THREADS", threads)
                .arg(&command)
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(output.status.success(), "{stem} failed: {}", String::from_utf8_lossy(&output.stderr));
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect();
            files.sort();
            outs.push(files);
        }
        let same = outs[0] == outs[1];
        pass &= same;
        parts.push(format!("{stem}: {} files {}", outs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    verdict(10, "determinism (1 vs 4 threads)", pass, &parts.join("; "));
}
