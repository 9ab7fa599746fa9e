//! Diagnostics of the strong-competition limit `ε → 0`: energies, boundary
//! fluxes, interaction integrals, support separation, decay near the
//! competitor's boundary data, the 1D free-boundary condition for the sup
//! kernel, and the local-model reference `W^±`.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{BoundaryData, Domain, NodeKind};
use crate::elliptic::{harmonic_extension, LinearSolverOptions};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::iteration::{run_monotone, solve_fixed_point, FixedPointOptions, MonotoneOptions, Solution, SolveMethod};
use crate::nonlocal::{apply_kernel, KernelKind, KernelSpec};

/// `Σ |∇u|² h^d` with forward differences over every lattice edge that has at
/// least one interior endpoint.
pub fn dirichlet_energy(u: &Field, domain: &Domain) -> f64 {
    let h = domain.h();
    let mut total = 0.0;
    for idx in domain.active_nodes() {
        for axis in 0..domain.dim() {
            let mut o = [0i32; 2];
            o[axis] = 1;
            let Some(nb) = domain.shifted(idx, o) else { continue };
            let interior_edge = domain.kind(idx) == NodeKind::Interior || domain.kind(nb) == NodeKind::Interior;
            if interior_edge {
                let g = (u[nb] - u[idx]) / h;
                total += g * g;
            }
        }
    }
    total * domain.cell_volume()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxProfile {
    /// `max |∂u/∂n|` over the boundary links.
    pub max: f64,
    /// `(interior node, collar node, outward derivative)` per link crossing `∂Ω`.
    pub links: Vec<(usize, usize, f64)>,
}

/// Outward normal derivative `(u(collar) - u(interior)) / h` across each
/// stencil link that leaves the box.
pub fn boundary_flux(u: &Field, domain: &Domain) -> FluxProfile {
    let h = domain.h();
    let links: Vec<(usize, usize, f64)> =
        domain.boundary_links().iter().map(|&(i, c)| (i, c, (u[c] - u[i]) / h)).collect();
    let max = links.iter().map(|l| l.2.abs()).fold(0.0, f64::max);
    FluxProfile { max, links }
}

/// `Σ_x u_i(x) H(u_j)(x) h^d` over interior nodes.
pub fn interaction_integral(ui: &Field, uj: &Field, domain: &Domain, kernel: &KernelSpec) -> f64 {
    let hj = apply_kernel(uj, domain, kernel);
    domain.interior().iter().map(|&x| ui[x] * hj[x]).sum::<f64>() * domain.cell_volume()
}

fn above(u: &Field, domain: &Domain, theta: f64) -> Vec<usize> {
    domain.interior().iter().copied().filter(|&x| u[x] > theta).collect()
}

fn set_distance(a: &[usize], b: &[usize], domain: &Domain) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let pb: Vec<[f64; 2]> = b.iter().map(|&y| domain.coords(y)).collect();
    a.par_iter()
        .map(|&x| {
            let p = domain.coords(x);
            pb.iter().map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
        .sqrt()
}

/// Minimum distance between interior nodes where `u_i > θ` and where
/// `u_j > θ`; `+∞` if either set is empty.
pub fn support_distance(ui: &Field, uj: &Field, domain: &Domain, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("support threshold must be positive, got {theta}")));
    }
    Ok(set_distance(&above(ui, domain, theta), &above(uj, domain, theta), domain))
}

/// Hausdorff distance between the thresholded supports of two fields.
pub fn support_hausdorff(a: &Field, b: &Field, domain: &Domain, theta: f64) -> f64 {
    let sa = above(a, domain, theta);
    let sb = above(b, domain, theta);
    if sa.is_empty() && sb.is_empty() {
        return 0.0;
    }
    if sa.is_empty() || sb.is_empty() {
        return f64::INFINITY;
    }
    let one_way = |from: &[usize], to: &[usize]| {
        from.iter().map(|&x| set_distance(&[x], to, domain)).fold(0.0, f64::max)
    };
    one_way(&sa, &sb).max(one_way(&sb, &sa))
}

/// Largest `sup_{B_1(x)} v` over interior `x` with `u(x) > θ`. Segregated
/// species keep this of order `θ`.
pub fn segregation_margin(u: &Field, v: &Field, domain: &Domain, theta: f64) -> Result<f64> {
    let sup = KernelSpec::unit(KernelKind::Sup, domain)?;
    let hv = apply_kernel(v, domain, &sup);
    Ok(above(u, domain, theta).into_iter().map(|x| hv[x]).fold(0.0, f64::max))
}

/// Collar nodes where the competitor's data exceeds `σ`.
pub fn boundary_set(phi: &Field, domain: &Domain, sigma: f64) -> Result<Vec<usize>> {
    let set: Vec<usize> = domain.collar().iter().copied().filter(|&c| phi[c] > sigma).collect();
    if set.is_empty() {
        return Err(Error::EmptyBoundarySet { sigma });
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub r: f64,
    /// `sup v` over interior nodes within `1 - r` of the boundary set.
    pub sup: f64,
    pub nodes: usize,
}

/// For each `r`, `sup v` over `{x interior : dist(x, Γ^σ) ≤ 1 - r}`. Radii whose
/// strip contains no interior node are skipped.
pub fn decay_profile(v: &Field, domain: &Domain, gamma: &[usize], radii: &[f64]) -> Vec<DecayPoint> {
    let dist: Vec<(usize, f64)> = domain
        .interior()
        .iter()
        .map(|&x| (x, set_distance(&[x], gamma, domain)))
        .collect();
    radii
        .iter()
        .filter_map(|&r| {
            let reach = 1.0 - r + 1e-9;
            let strip: Vec<f64> = dist.iter().filter(|(_, d)| *d <= reach).map(|&(x, _)| v[x]).collect();
            (!strip.is_empty()).then(|| DecayPoint { r, sup: strip.iter().copied().fold(0.0, f64::max), nodes: strip.len() })
        })
        .collect()
}

/// Least-squares slope of `log sup` against `1/√ε`, skipping zero values.
/// `None` with fewer than two usable points.
pub fn decay_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, s)| *s > 0.0).map(|&(eps, s)| (1.0 / eps.sqrt(), s.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBoundaryReport {
    pub theta: f64,
    /// Rightmost point where `u` drops through `θ`.
    pub x_f: f64,
    /// Leftmost point where `v` rises through `θ`.
    pub x_f_other: f64,
    /// `u'(x_f)` from the support side of `u`.
    pub slope_u: f64,
    /// `v'(x_f + 1)` from the support side of `v`.
    pub slope_v: f64,
    /// `|u'(x_f) + v'(x_f + 1)|`.
    pub residual: f64,
    /// `max |A(x+h) - 2A(x) + A(x-h)|` for `A(x) = u(x) - v(x+1)` over interior
    /// `x` with `x + 1` interior.
    pub affinity_defect: f64,
    /// Fraction of interior nodes where the sup of the competitor over the
    /// unit ball is attained at the far end of the ball (`v(x+1)` resp. `u(x-1)`).
    pub sup_at_shift_fraction: f64,
}

/// Derivative at `t` of the quadratic through three nodes.
fn quadratic_slope(pts: [(f64, f64); 3], t: f64) -> f64 {
    let [(x0, f0), (x1, f1), (x2, f2)] = pts;
    f0 * ((t - x1) + (t - x2)) / ((x0 - x1) * (x0 - x2))
        + f1 * ((t - x0) + (t - x2)) / ((x1 - x0) * (x1 - x2))
        + f2 * ((t - x0) + (t - x1)) / ((x2 - x0) * (x2 - x1))
}

/// Free-boundary diagnostics for the two-species sup-kernel problem in 1D.
pub fn free_boundary_1d(sol: &Solution, domain: &Domain, theta: f64) -> Result<FreeBoundaryReport> {
    if domain.dim() != 1 || sol.fields.len() != 2 {
        return Err(Error::InvalidArgument("free-boundary diagnostics need d = 1 and two species".into()));
    }
    if sol.kernel != KernelKind::Sup {
        return Err(Error::InvalidArgument("free-boundary diagnostics need the sup kernel".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {theta}")));
    }
    if domain.lower()[0] > -1.0 + 1e-12 || domain.upper()[0] < 1.0 - 1e-12 {
        return Err(Error::InvalidArgument("free-boundary diagnostics need (-a, a) with a >= 1".into()));
    }
    let (u, v) = (&sol.fields[0], &sol.fields[1]);
    let h = domain.h();
    // Active nodes in lattice order are consecutive in 1D.
    let nodes: Vec<usize> = domain.active_nodes().collect();
    let x: Vec<f64> = nodes.iter().map(|&n| domain.coords(n)[0]).collect();
    let inside = |t: f64| t > domain.lower()[0] && t < domain.upper()[0];

    let pos_u = (0..nodes.len() - 1)
        .rev()
        .find(|&p| u[nodes[p]] > theta && u[nodes[p + 1]] <= theta && inside(x[p] + 0.5 * h))
        .ok_or(Error::NoCrossing { theta })?;
    let x_f = x[pos_u] + h * (u[nodes[pos_u]] - theta) / (u[nodes[pos_u]] - u[nodes[pos_u + 1]]);
    let pos_v = (1..nodes.len())
        .find(|&p| v[nodes[p]] > theta && v[nodes[p - 1]] <= theta && inside(x[p] - 0.5 * h))
        .ok_or(Error::NoCrossing { theta })?;
    let x_f_other = x[pos_v] - h * (v[nodes[pos_v]] - theta) / (v[nodes[pos_v]] - v[nodes[pos_v - 1]]);

    if pos_u < 2 {
        return Err(Error::InvalidArgument("free boundary too close to the collar edge".into()));
    }
    let slope_u = quadratic_slope([pos_u, pos_u - 1, pos_u - 2].map(|p| (x[p], u[nodes[p]])), x_f);
    let y = x_f + 1.0;
    let first = x.iter().position(|&t| t >= y - 1e-12).filter(|&p| p + 2 < nodes.len()).ok_or_else(|| {
        Error::InvalidArgument("x_f + 1 lies too close to the edge of the collar".into())
    })?;
    let slope_v = quadratic_slope([first, first + 1, first + 2].map(|p| (x[p], v[nodes[p]])), y);

    let shift = (1.0 / h).round() as i32;
    let mut defect: f64 = 0.0;
    for &n in domain.interior() {
        let Some(n1) = domain.shifted(n, [shift, 0]) else { continue };
        if domain.kind(n1) != NodeKind::Interior {
            continue;
        }
        let a = |k: i32| {
            let p = domain.shifted(n, [k, 0]).unwrap();
            let q = domain.shifted(n1, [k, 0]).unwrap();
            u[p] - v[q]
        };
        defect = defect.max((a(1) - 2.0 * a(0) + a(-1)).abs());
    }

    let sup = KernelSpec::unit(KernelKind::Sup, domain)?;
    let (hv, hu) = (apply_kernel(v, domain, &sup), apply_kernel(u, domain, &sup));
    let mut hits = 0usize;
    for &n in domain.interior() {
        let right = domain.shifted(n, [shift, 0]).map_or(f64::NAN, |q| v[q]);
        let left = domain.shifted(n, [-shift, 0]).map_or(f64::NAN, |q| u[q]);
        hits += usize::from(hv[n] == right) + usize::from(hu[n] == left);
    }
    let fraction = hits as f64 / (2 * domain.interior().len()) as f64;

    Ok(FreeBoundaryReport {
        theta,
        x_f,
        x_f_other,
        slope_u,
        slope_v,
        residual: (slope_u + slope_v).abs(),
        affinity_defect: defect,
        sup_at_shift_fraction: fraction,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjacentReference {
    #[serde(skip)]
    pub w: Field,
    #[serde(skip)]
    pub w_plus: Field,
    #[serde(skip)]
    pub w_minus: Field,
    /// Largest mismatch `| |∂W⁺| - |∂W⁻| |` across lattice edges where `W`
    /// changes sign; `None` if `W` never changes sign.
    pub slope_mismatch: Option<f64>,
}

/// Limit configuration of the local competition model: `W` harmonic with
/// data `φ₁ - φ₂`, split into positive and negative parts.
pub fn adjacent_reference(phi1: &Field, phi2: &Field, domain: &Domain, lin: &LinearSolverOptions) -> Result<AdjacentReference> {
    let diff = phi1.combine(1.0, phi2, -1.0);
    let w = harmonic_extension(&diff, domain, lin)?;
    let mut w_plus = Field::zeros(domain);
    let mut w_minus = Field::zeros(domain);
    for n in domain.active_nodes() {
        w_plus[n] = w[n].max(0.0);
        w_minus[n] = (-w[n]).max(0.0);
    }
    let h = domain.h();
    let mut mismatch: Option<f64> = None;
    for &a in domain.interior() {
        for axis in 0..domain.dim() {
            let mut o = [0i32; 2];
            o[axis] = 1;
            let Some(b) = domain.shifted(a, o) else { continue };
            if domain.kind(b) != NodeKind::Interior || (w[a] > 0.0) == (w[b] > 0.0) {
                continue;
            }
            // Slopes one cell further out on each side of the sign change.
            let back = domain.shifted(a, o.map(|c| -c));
            let fwd = domain.shifted(b, o);
            if let (Some(p), Some(q)) = (back, fwd) {
                let side_a = (w[a] - w[p]).abs() / h;
                let side_b = (w[q] - w[b]).abs() / h;
                let m = (side_a - side_b).abs();
                mismatch = Some(mismatch.map_or(m, |x| x.max(m)));
            }
        }
    }
    Ok(AdjacentReference { w, w_plus, w_minus, slope_mismatch: mismatch })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed { kind: String, message: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub status: RowStatus,
    pub method: Option<SolveMethod>,
    pub iterations: usize,
    pub residual: f64,
    /// Per-species Dirichlet energy.
    pub energy: Vec<f64>,
    /// Per-species `max |∂u/∂n|`.
    pub max_flux: Vec<f64>,
    /// `I[i][j] = Σ u_i H(u_j) h^d`, zero on the diagonal.
    pub interaction: Vec<Vec<f64>>,
    /// Support distance per species pair `(i, j)`, `i < j`.
    pub distance: Vec<(usize, usize, f64)>,
    pub theta: f64,
    /// Wall-clock seconds; excluded from the data files.
    #[serde(skip)]
    pub runtime: f64,
    #[serde(skip)]
    pub solution: Option<Solution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    pub monotone: MonotoneOptions,
    pub fixed_point: FixedPointOptions,
    pub damping: f64,
    /// Start each ε from the previous solution with the damped fixed-point
    /// solver, falling back to the monotone scheme on failure.
    pub warm_start: bool,
    pub theta: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            monotone: MonotoneOptions::default(),
            fixed_point: FixedPointOptions::default(),
            damping: 0.5,
            warm_start: true,
            theta: 1e-3,
        }
    }
}

/// Diagnostics of one solved configuration.
pub fn sweep_row(sol: Solution, domain: &Domain, kernel: &KernelSpec, theta: f64, runtime: f64) -> Result<SweepRow> {
    let m = sol.fields.len();
    let mut interaction = vec![vec![0.0; m]; m];
    let mut distance = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                interaction[i][j] = interaction_integral(&sol.fields[i], &sol.fields[j], domain, kernel);
            }
            if i < j {
                distance.push((i, j, support_distance(&sol.fields[i], &sol.fields[j], domain, theta)?));
            }
        }
    }
    Ok(SweepRow {
        eps: sol.eps,
        status: RowStatus::Ok,
        method: Some(sol.method),
        iterations: sol.iterations,
        residual: sol.residual,
        energy: sol.fields.iter().map(|u| dirichlet_energy(u, domain)).collect(),
        max_flux: sol.fields.iter().map(|u| boundary_flux(u, domain).max).collect(),
        interaction,
        distance,
        theta,
        runtime,
        solution: Some(sol),
    })
}

fn failed_row(eps: f64, theta: f64, err: &Error, runtime: f64) -> SweepRow {
    SweepRow {
        eps,
        status: RowStatus::Failed { kind: err.kind().to_string(), message: err.to_string() },
        method: None,
        iterations: 0,
        residual: f64::NAN,
        energy: Vec::new(),
        max_flux: Vec::new(),
        interaction: Vec::new(),
        distance: Vec::new(),
        theta,
        runtime,
        solution: None,
    }
}

/// Solves for each ε in a strictly decreasing list and records the
/// diagnostics. A failing ε is recorded and the sweep continues.
pub fn epsilon_sweep(
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    eps_list: &[f64],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon list".into()));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilon list must be positive and strictly decreasing".into()));
    }
    let one = |eps: f64, warm: Option<&[Field]>| -> (Result<Solution>, f64) {
        let start = Instant::now();
        let sol = match warm {
            Some(init) => solve_fixed_point(eps, domain, data, kernel, init.to_vec(), opts.damping, &opts.fixed_point)
                .or_else(|_| run_monotone(eps, domain, data, kernel, &opts.monotone)),
            None => run_monotone(eps, domain, data, kernel, &opts.monotone),
        };
        (sol, start.elapsed().as_secs_f64())
    };
    let finish = |eps: f64, (sol, t): (Result<Solution>, f64)| match sol.and_then(|s| sweep_row(s, domain, kernel, opts.theta, t)) {
        Ok(row) => row,
        Err(e) => failed_row(eps, opts.theta, &e, t),
    };

    let rows = if opts.warm_start {
        let mut rows: Vec<SweepRow> = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let warm = rows.iter().rev().find_map(|r| r.solution.as_ref().map(|s| s.fields.clone()));
            rows.push(finish(eps, one(eps, warm.as_deref())));
        }
        rows
    } else {
        eps_list.par_iter().map(|&eps| finish(eps, one(eps, None))).collect()
    };
    Ok(SweepReport { rows })
}
