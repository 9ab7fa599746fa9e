//! Time-dependent competition system
//!
//! ```text
//!     ∂u_i/∂t - Δu_i = -(1/ε) u_i Σ_{j≠i} H(u_j),     u_i = φ_i on the collar,
//! ```
//!
//! advanced with implicit diffusion and the reaction coefficient frozen at the
//! old time level:
//!
//! ```text
//!     (I/Δt - Δ_h + diag c^n) u^{n+1} = u^n / Δt,     c^n = (1/ε) Σ_{j≠i} H(u_j^n).
//! ```
//!
//! Each step is one M-matrix solve per species, so positivity holds for any Δt.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{BoundaryData, Domain, NodeKind};
use crate::elliptic::{boundary_flux_sum, solve_shifted, LinearSolverOptions};
use crate::error::{Error, Result};
use crate::field::{family_max_diff, Field};
use crate::nonlocal::{apply_kernel_family, check_eps, coefficients_from_kernels, KernelSpec};

#[derive(Debug, Clone)]
pub struct ParabolicState {
    pub t: f64,
    pub fields: Vec<Field>,
    pub initial: Vec<Field>,
    pub dt: f64,
}

impl ParabolicState {
    /// Initial data must be finite, nonnegative, and equal to the boundary
    /// data on the collar.
    pub fn new(initial: Vec<Field>, data: &BoundaryData, domain: &Domain, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if initial.len() != data.species_count() {
            return Err(Error::InvalidArgument(format!(
                "initial data has {} species, boundary data has {}",
                initial.len(),
                data.species_count()
            )));
        }
        for (s, (u, phi)) in initial.iter().zip(data.fields()).enumerate() {
            if u.len() != domain.node_count() {
                return Err(Error::InvalidArgument(format!("species {s}: wrong field length")));
            }
            for n in domain.active_nodes() {
                if !(u[n].is_finite() && u[n] >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "species {s}: initial value {} at {:?} is negative or not finite",
                        u[n],
                        &domain.coords(n)[..domain.dim()]
                    )));
                }
                if domain.kind(n) == NodeKind::Collar && u[n] != phi[n] {
                    return Err(Error::InvalidArgument(format!(
                        "species {s}: initial collar value {} at {:?} differs from boundary data {}",
                        u[n],
                        &domain.coords(n)[..domain.dim()],
                        phi[n]
                    )));
                }
            }
        }
        Ok(Self { t: 0.0, fields: initial.clone(), initial, dt })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    /// `Σ_x u_i h^d` per species.
    pub mass: Vec<f64>,
    /// `Σ_{i≠j} Σ_x u_i H(u_j) h^d`.
    pub interaction: f64,
    /// `max_i ‖u_i^{n+1} - u_i^n‖∞`.
    pub delta: f64,
    /// Largest relative defect of the per-species balance
    /// `Σ (u^{n+1} - u^n) h^d / Δt = flux(u^{n+1}) - Σ c u^{n+1} h^d`.
    pub mass_defect: f64,
    pub min_value: f64,
}

fn interaction_total(fields: &[Field], kernels: &[Field], domain: &Domain) -> f64 {
    let m = fields.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            total += domain.interior().iter().map(|&x| fields[i][x] * kernels[j][x]).sum::<f64>();
        }
    }
    total * domain.cell_volume()
}

/// One step of length `dt` (which may be shorter than `state.dt` for a final
/// partial step).
pub fn imex_step(
    state: &mut ParabolicState,
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    dt: f64,
    lin: &LinearSolverOptions,
) -> Result<StepRecord> {
    check_eps(eps)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let kernels = apply_kernel_family(&state.fields, domain, kernel);
    let coeffs = coefficients_from_kernels(&kernels, eps, domain);
    let vol = domain.cell_volume();
    let results: Vec<(Field, f64)> = state
        .fields
        .par_iter()
        .zip(coeffs.par_iter())
        .zip(data.fields().par_iter())
        .map(|((u, c), phi)| {
            let mut shift = c.clone();
            let mut source = Field::zeros(domain);
            for &x in domain.interior() {
                shift[x] += 1.0 / dt;
                source[x] = u[x] / dt;
            }
            let (next, _) = solve_shifted(domain, Some(&shift), Some(&source), phi, lin)?;
            let rate: f64 = domain.interior().iter().map(|&x| next[x] - u[x]).sum::<f64>() * vol / dt;
            let flux = boundary_flux_sum(&next, domain);
            let reaction: f64 = domain.interior().iter().map(|&x| c[x] * next[x]).sum::<f64>() * vol;
            // Link fluxes can cancel in the sum, so scale by their absolute total.
            let link_scale = domain.h().powi(domain.dim() as i32 - 2);
            let flux_abs: f64 = domain.boundary_links().iter().map(|&(i, b)| (next[b] - next[i]).abs() * link_scale).sum();
            let scale = rate.abs().max(flux_abs).max(reaction.abs());
            let defect = (rate - flux + reaction).abs();
            Ok((next, if scale > 0.0 { defect / scale } else { defect }))
        })
        .collect::<Result<_>>()?;
    let (next, defects): (Vec<Field>, Vec<f64>) = results.into_iter().unzip();
    let delta = family_max_diff(&next, &state.fields, domain);
    state.fields = next;
    state.t += dt;
    let new_kernels = apply_kernel_family(&state.fields, domain, kernel);
    Ok(StepRecord {
        t: state.t,
        mass: state.fields.iter().map(|u| domain.interior().iter().map(|&x| u[x]).sum::<f64>() * vol).collect(),
        interaction: interaction_total(&state.fields, &new_kernels, domain),
        delta,
        mass_defect: defects.into_iter().fold(0.0, f64::max),
        min_value: state.fields.iter().flat_map(|u| domain.interior().iter().map(move |&x| u[x])).fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    /// Final time; `None` runs until steady.
    pub t_end: Option<f64>,
    /// Stop once `max_i ‖u^{n+1} - u^n‖∞ < steady_tol · Δt`.
    pub steady_tol: Option<f64>,
    pub max_steps: usize,
    pub linear: LinearSolverOptions,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { t_end: None, steady_tol: Some(1e-6), max_steps: 5_000_000, linear: LinearSolverOptions::default() }
    }
}

/// Steps until `t_end` or until the change per step falls below
/// `steady_tol · Δt`, whichever comes first.
pub fn evolve(
    mut state: ParabolicState,
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    opts: &EvolveOptions,
) -> Result<(ParabolicState, Vec<StepRecord>)> {
    check_eps(eps)?;
    match (opts.t_end, opts.steady_tol) {
        (None, None) => return Err(Error::InvalidArgument("need a final time or a steady tolerance".into())),
        (Some(t), _) if !(t.is_finite() && t >= 0.0) => {
            return Err(Error::InvalidArgument(format!("final time must be nonnegative, got {t}")))
        }
        (_, Some(s)) if !(s > 0.0) => {
            return Err(Error::InvalidArgument(format!("steady tolerance must be positive, got {s}")))
        }
        _ => {}
    }
    let mut trace = Vec::new();
    let t0 = state.t;
    loop {
        let dt = match opts.t_end {
            Some(t_end) => {
                let left = t_end - (state.t - t0);
                if left <= 1e-12 * state.dt {
                    break;
                }
                left.min(state.dt)
            }
            None => state.dt,
        };
        if trace.len() >= opts.max_steps {
            let last = trace.last().map_or(f64::NAN, |r: &StepRecord| r.delta);
            return Err(Error::IterationCap { cap: opts.max_steps, last_gap: last, gap_history: Vec::new() });
        }
        let rec = imex_step(&mut state, eps, domain, data, kernel, dt, &opts.linear)?;
        let steady = opts.steady_tol.is_some_and(|s| rec.delta < s * dt);
        trace.push(rec);
        if steady {
            break;
        }
    }
    Ok((state, trace))
}
