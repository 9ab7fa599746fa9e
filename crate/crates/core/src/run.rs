//! Executes a [`RunConfig`] and writes its artifacts:
//!
//! * `report.json`: status, provenance (SHA-256 of the configuration text),
//!   every tolerance in force, and the command's diagnostics; on failure the
//!   error kind and message.
//! * `solution_<i>.grid` per species (0-based), see [`crate::output`].
//! * `history.csv` (solve), `sweep.csv` and `decay.csv` (sweep), `trace.csv`
//!   (parabolic).
//!
//! Wall-clock times are kept out of every file so repeated runs are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Command, InitialData, RunConfig};
use crate::domain::{make_boundary_data, BoundaryData, Domain, PatchProfile};
use crate::elliptic::harmonic_extension;
use crate::error::{Error, Result};
use crate::field::{family_max_diff, Field};
use crate::iteration::{
    audit_interleaving, family_with_interior, run_monotone, run_monotone_traced, sandwich_check, solve_fixed_point, Solution,
};
use crate::nonlocal::{KernelKind, KernelSpec};
use crate::output::{num, write_grid, Csv};
use crate::parabolic::{evolve, EvolveOptions, ParabolicState};
use crate::segregation::{
    boundary_flux, boundary_set, decay_profile, decay_slope, dirichlet_energy, epsilon_sweep, free_boundary_1d,
    interaction_integral, segregation_margin, support_distance, RowStatus, SweepOptions,
};

/// What a finished run left on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    pub files: Vec<PathBuf>,
}

struct Setup {
    domain: Domain,
    data: BoundaryData,
    kernel: KernelSpec,
    theta: f64,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let domain = Domain::new(&cfg.domain.lower, &cfg.domain.upper, cfg.domain.h)?;
    let profiles: Vec<PatchProfile> = cfg.species.iter().map(|p| PatchProfile { patches: p.clone() }).collect();
    let data = make_boundary_data(&profiles, &domain)?;
    let kernel = KernelSpec::new(cfg.kernel.kind, cfg.kernel.radius, &domain)?;
    let scale = data.max_value();
    let theta = cfg.segregation.theta.unwrap_or(if scale > 0.0 { 1e-3 * scale } else { 1e-3 });
    Ok(Setup { domain, data, kernel, theta })
}

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn tolerances(cfg: &RunConfig, theta: Option<f64>, dt: Option<f64>) -> Value {
    json!({
        "tol_outer": cfg.monotone.tol_outer,
        "audit_slack": cfg.monotone.slack(),
        "residual_tol": cfg.monotone.residual_tol,
        "max_outer": cfg.monotone.max_outer,
        "linear_method": cfg.monotone.linear.method,
        "linear_tol": cfg.monotone.linear.tol,
        "linear_max_iter": cfg.monotone.linear.max_iter,
        "fixed_point_tol": cfg.fixed_point.tol,
        "fixed_point_max_iter": cfg.fixed_point.max_iter,
        "damping": cfg.damping,
        "theta": theta,
        "sigma": cfg.segregation.sigma,
        "steady_tol": cfg.parabolic.steady_tol,
        "dt": dt,
    })
}

/// Runs the configured command, writing artifacts into `out`. `report.json`
/// is written on success and on failure; the error is returned afterwards.
pub fn execute(cfg: &RunConfig, config_text: &str, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut theta = None;
    let mut dt = None;
    let result = setup(cfg).and_then(|s| {
        theta = Some(s.theta);
        if cfg.command == Command::Parabolic {
            dt = Some(cfg.parabolic.dt.unwrap_or(s.domain.h() * s.domain.h()));
        }
        match cfg.command {
            Command::Solve => run_solve(cfg, &s, out, &mut files),
            Command::Sweep => run_sweep(cfg, &s, out, &mut files),
            Command::Parabolic => run_parabolic(cfg, &s, dt.unwrap(), out, &mut files),
            Command::Fb1d => run_fb1d(cfg, &s, out, &mut files),
        }
    });
    let mut report = json!({
        "command": cfg.command,
        "provenance": {
            "config_sha256": config_digest(config_text),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "domain": {
            "d": cfg.domain.lower.len(),
            "lower": cfg.domain.lower,
            "upper": cfg.domain.upper,
            "h": cfg.domain.h,
        },
        "kernel": cfg.kernel,
        "species": cfg.species.len(),
        "eps": cfg.eps,
        "eps_list": cfg.eps_list,
        "tolerances": tolerances(cfg, theta, dt),
    });
    let failure = match result {
        Ok(v) => {
            report["status"] = json!("ok");
            report["result"] = v;
            None
        }
        Err(e) => {
            report["status"] = json!("error");
            report["error"] = error_json(&e);
            Some(e)
        }
    };
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    files.push(path);
    match failure {
        Some(e) => Err(e),
        None => Ok(RunOutcome { report, files }),
    }
}

/// Machine-readable form of an error.
pub fn error_json(e: &Error) -> Value {
    let mut v = json!({ "kind": e.kind(), "message": e.to_string() });
    match e {
        Error::Config(list) => v["errors"] = json!(list),
        Error::IterationCap { cap, last_gap, gap_history } => {
            v["cap"] = json!(cap);
            v["last_gap"] = json!(last_gap);
            v["gap_history"] = json!(gap_history);
        }
        Error::LinearSolve { report } => v["linear_solve"] = json!(report),
        _ => {}
    }
    v
}

fn write_solution(fields: &[Field], domain: &Domain, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    for (i, u) in fields.iter().enumerate() {
        let path = out.join(format!("solution_{i}.grid"));
        write_grid(&path, u, domain)?;
        files.push(path);
    }
    Ok(())
}

fn field_diagnostics(fields: &[Field], s: &Setup) -> Result<Value> {
    let m = fields.len();
    let mut interaction = vec![vec![0.0; m]; m];
    let mut distance = Vec::new();
    let mut margin = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            interaction[i][j] = interaction_integral(&fields[i], &fields[j], &s.domain, &s.kernel);
            if i < j {
                let d = support_distance(&fields[i], &fields[j], &s.domain, s.theta)?;
                distance.push(json!({ "i": i, "j": j, "distance": d }));
            }
            margin.push(json!({ "i": i, "j": j, "sup_competitor_on_support": segregation_margin(&fields[i], &fields[j], &s.domain, s.theta)? }));
        }
    }
    Ok(json!({
        "theta": s.theta,
        "dirichlet_energy": fields.iter().map(|u| dirichlet_energy(u, &s.domain)).collect::<Vec<_>>(),
        "max_boundary_flux": fields.iter().map(|u| boundary_flux(u, &s.domain).max).collect::<Vec<_>>(),
        "interaction": interaction,
        "support_distance": distance,
        "segregation_margin": margin,
    }))
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn run_solve(cfg: &RunConfig, s: &Setup, out: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let eps = cfg.eps.expect("validated");
    let (sol, state) = run_monotone_traced(eps, &s.domain, &s.data, &s.kernel, &cfg.monotone)?;
    write_solution(&sol.fields, &s.domain, out, files)?;
    if cfg.output.history {
        let mut csv = Csv::new(&["k", "species", "gap", "min", "max", "flux"].map(String::from));
        for st in state.stats() {
            csv.row(&[st.k.to_string(), st.species.to_string(), opt_num(st.gap), num(st.min), num(st.max), num(st.flux)]);
        }
        let path = out.join("history.csv");
        csv.write(&path)?;
        files.push(path);
    }
    let mut result = json!({
        "solution": sol,
        "gap_increases": state.gap_increases(),
        "diagnostics": field_diagnostics(&sol.fields, s)?,
    });
    if cfg.output.audit {
        let audit = audit_interleaving(state.history(), &s.domain, cfg.monotone.slack());
        result["audit"] = json!({
            "iterates_checked": audit.iterates_checked,
            "incomplete": audit.incomplete,
            "slack": audit.slack,
            "violation_count": audit.violations.len(),
            "max_violation": audit.max_violation,
            "violations": audit.violations.iter().take(cfg.output.audit_limit).collect::<Vec<_>>(),
        });
    }
    if cfg.output.uniqueness_check {
        result["uniqueness"] = uniqueness_check(cfg, s, &sol)?;
    }
    Ok(result)
}

/// Damped fixed point from three starts, compared with the monotone limits.
fn uniqueness_check(cfg: &RunConfig, s: &Setup, sol: &Solution) -> Result<Value> {
    let lin = &cfg.monotone.linear;
    let harmonic: Vec<Field> =
        s.data.fields().iter().map(|phi| harmonic_extension(phi, &s.domain, lin)).collect::<Result<_>>()?;
    let doubled = family_with_interior(&s.data, &s.domain, |i, x| 2.0 * harmonic[i][x]);
    let uniform = family_with_interior(&s.data, &s.domain, |_, _| s.data.max_value());
    let mut runs = Vec::new();
    for (name, init) in [("harmonic", harmonic.clone()), ("doubled_harmonic", doubled), ("uniform", uniform)] {
        let entry = match solve_fixed_point(sol.eps, &s.domain, &s.data, &s.kernel, init, cfg.damping, &cfg.fixed_point) {
            Ok(w) => json!({
                "init": name,
                "status": "ok",
                "iterations": w.iterations,
                "max_diff_to_monotone": family_max_diff(&w.fields, &sol.fields, &s.domain),
                "sandwich": sandwich_check(&w.fields, &sol.odd, &sol.even, &s.domain, cfg.monotone.slack()),
            }),
            Err(e) => json!({ "init": name, "status": "error", "error": error_json(&e) }),
        };
        runs.push(entry);
    }
    Ok(json!({ "exploratory": s.kernel.kind() != KernelKind::Integral, "runs": runs }))
}

fn run_sweep(cfg: &RunConfig, s: &Setup, out: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let opts = SweepOptions {
        monotone: cfg.monotone,
        fixed_point: cfg.fixed_point,
        damping: cfg.damping,
        warm_start: cfg.warm_start,
        theta: s.theta,
    };
    let report = epsilon_sweep(&s.domain, &s.data, &s.kernel, &cfg.eps_list, &opts)?;
    let m = s.data.species_count();

    let mut header = vec!["eps", "status", "method", "iterations", "residual"].into_iter().map(String::from).collect::<Vec<_>>();
    header.extend((0..m).map(|i| format!("energy_{i}")));
    header.extend((0..m).map(|i| format!("max_flux_{i}")));
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    header.extend(pairs.iter().map(|(i, j)| format!("interaction_{i}_{j}")));
    let upper: Vec<(usize, usize)> = pairs.iter().copied().filter(|(i, j)| i < j).collect();
    header.extend(upper.iter().map(|(i, j)| format!("distance_{i}_{j}")));
    header.push("theta".into());
    let mut csv = Csv::new(&header);
    for row in &report.rows {
        let ok = matches!(row.status, RowStatus::Ok);
        let mut cells = vec![
            num(row.eps),
            if ok { "ok".into() } else { "failed".into() },
            row.method.map(|m| serde_json::to_value(m).unwrap().as_str().unwrap().to_string()).unwrap_or_default(),
            if ok { row.iterations.to_string() } else { String::new() },
            if ok { num(row.residual) } else { String::new() },
        ];
        if ok {
            cells.extend(row.energy.iter().map(|&x| num(x)));
            cells.extend(row.max_flux.iter().map(|&x| num(x)));
            cells.extend(pairs.iter().map(|&(i, j)| num(row.interaction[i][j])));
            cells.extend(row.distance.iter().map(|d| num(d.2)));
        } else {
            cells.extend(std::iter::repeat_n(String::new(), 2 * m + pairs.len() + upper.len()));
        }
        cells.push(num(row.theta));
        csv.row(&cells);
    }
    let path = out.join("sweep.csv");
    csv.write(&path)?;
    files.push(path);

    // Decay of each species near every competitor's boundary data.
    let mut decay_csv = Csv::new(&["eps", "species", "competitor", "r", "sup", "nodes"].map(String::from));
    let mut decay = Vec::new();
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let gamma = match boundary_set(s.data.species(j), &s.domain, cfg.segregation.sigma) {
                Ok(g) => g,
                Err(e) => {
                    decay.push(json!({ "species": i, "competitor": j, "error": error_json(&e) }));
                    continue;
                }
            };
            let mut per_r: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.segregation.decay_radii.len()];
            for row in &report.rows {
                let Some(sol) = &row.solution else { continue };
                for p in decay_profile(&sol.fields[i], &s.domain, &gamma, &cfg.segregation.decay_radii) {
                    decay_csv.row(&[num(row.eps), i.to_string(), j.to_string(), num(p.r), num(p.sup), p.nodes.to_string()]);
                    let k = cfg.segregation.decay_radii.iter().position(|&r| r == p.r).unwrap();
                    per_r[k].push((row.eps, p.sup));
                }
            }
            let slopes: Vec<Value> = cfg
                .segregation
                .decay_radii
                .iter()
                .zip(&per_r)
                .map(|(&r, pts)| json!({ "r": r, "log_sup_vs_inv_sqrt_eps_slope": decay_slope(pts) }))
                .collect();
            decay.push(json!({ "species": i, "competitor": j, "fits": slopes }));
        }
    }
    let path = out.join("decay.csv");
    decay_csv.write(&path)?;
    files.push(path);

    if let Some(last) = report.rows.iter().rev().find_map(|r| r.solution.as_ref()) {
        write_solution(&last.fields, &s.domain, out, files)?;
    }
    let failed = report.rows.iter().filter(|r| !matches!(r.status, RowStatus::Ok)).count();
    Ok(json!({ "rows": report.rows, "failed_rows": failed, "decay": decay }))
}

fn run_parabolic(cfg: &RunConfig, s: &Setup, dt: f64, out: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let eps = cfg.eps.expect("validated");
    let lin = cfg.monotone.linear;
    let init: Vec<Field> = match cfg.parabolic.init {
        InitialData::Harmonic => {
            s.data.fields().iter().map(|phi| harmonic_extension(phi, &s.domain, &lin)).collect::<Result<_>>()?
        }
        InitialData::Zero => s.data.fields().to_vec(),
    };
    let state = ParabolicState::new(init, &s.data, &s.domain, dt)?;
    let opts = EvolveOptions {
        t_end: cfg.parabolic.t_end,
        steady_tol: cfg.parabolic.steady_tol,
        max_steps: cfg.parabolic.max_steps,
        linear: lin,
    };
    let (state, trace) = evolve(state, eps, &s.domain, &s.data, &s.kernel, &opts)?;
    let m = s.data.species_count();
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..m).map(|i| format!("mass_{i}")));
    header.extend(["interaction", "delta", "mass_defect"].map(String::from));
    let mut csv = Csv::new(&header);
    for (n, rec) in trace.iter().enumerate() {
        if (n + 1) % cfg.parabolic.trace_every != 0 && n + 1 != trace.len() {
            continue;
        }
        let mut cells = vec![(n + 1).to_string(), num(rec.t)];
        cells.extend(rec.mass.iter().map(|&x| num(x)));
        cells.extend([num(rec.interaction), num(rec.delta), num(rec.mass_defect)]);
        csv.row(&cells);
    }
    let path = out.join("trace.csv");
    csv.write(&path)?;
    files.push(path);
    write_solution(&state.fields, &s.domain, out, files)?;

    let steady = match (cfg.parabolic.steady_tol, trace.last()) {
        (Some(tol), Some(last)) => last.delta < tol * dt,
        _ => false,
    };
    let mut result = json!({
        "steps": trace.len(),
        "t": state.t,
        "dt": dt,
        "steady_reached": steady,
        "max_mass_defect": trace.iter().map(|r| r.mass_defect).fold(0.0, f64::max),
        "min_value": trace.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min),
        "final_delta": trace.last().map(|r| r.delta),
        "diagnostics": field_diagnostics(&state.fields, s)?,
    });
    if cfg.parabolic.compare_elliptic {
        let ell = run_monotone(eps, &s.domain, &s.data, &s.kernel, &cfg.monotone)?;
        result["elliptic_max_diff"] = json!(family_max_diff(&state.fields, &ell.fields, &s.domain));
    }
    Ok(result)
}

fn run_fb1d(cfg: &RunConfig, s: &Setup, out: &Path, files: &mut Vec<PathBuf>) -> Result<Value> {
    let eps = cfg.eps.expect("validated");
    let sol = run_monotone(eps, &s.domain, &s.data, &s.kernel, &cfg.monotone)?;
    write_solution(&sol.fields, &s.domain, out, files)?;
    let fb = free_boundary_1d(&sol, &s.domain, s.theta)?;
    Ok(json!({
        "solution": sol,
        "free_boundary": fb,
        "diagnostics": field_diagnostics(&sol.fields, s)?,
    }))
}
