//! Monotone sub/super-solution iteration for the nonlocal segregation system
//!
//! ```text
//!     Δu_i = (1/ε) u_i Σ_{j≠i} H(u_j)   in Ω,      u_i = φ_i on the collar.
//! ```
//!
//! Starting from the harmonic extensions `u_i^0`, each step freezes the whole
//! previous family and solves one screened problem per species:
//!
//! ```text
//!     Δu_i^{k+1} = (1/ε) u_i^{k+1} Σ_{j≠i} H(u_j^k).
//! ```
//!
//! Because `H` is monotone and the screened solve is order-reversing in its
//! coefficient, the iterates interleave:
//! `u^0 ≥ u^2 ≥ … ≥ u^{2k} ≥ u^{2k+1} ≥ … ≥ u^3 ≥ u^1`. The even family
//! decreases to `ū`, the odd family increases to `u̲`, and for the integral
//! kernel the two limits coincide, which is what the termination test checks.
//!
//! All species advance from the same frozen family (Jacobi order). Updating
//! species one after another would mix even and odd iterates and lose the
//! interleaving.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{BoundaryData, Domain, NodeKind};
use crate::elliptic::{boundary_flux_sum, discrete_laplacian, harmonic_extension, screened_solve, LinearSolverOptions};
use crate::error::{Error, Result};
use crate::field::{family_max_diff, Field};
use crate::nonlocal::{apply_kernel, apply_kernel_family, check_eps, coefficients_from_kernels, KernelKind, KernelSpec};

/// Iterates kept for auditing: the first `cap` in full, then a rolling window.
#[derive(Debug, Clone)]
pub struct IterateHistory {
    cap: usize,
    head: Vec<(usize, Vec<Field>)>,
    tail: VecDeque<(usize, Vec<Field>)>,
}

const TAIL_LEN: usize = 4;

impl IterateHistory {
    pub fn new(cap: usize) -> Self {
        Self { cap, head: Vec::new(), tail: VecDeque::new() }
    }

    /// History holding `iterates[k]` as iterate `k`.
    pub fn from_iterates(iterates: Vec<Vec<Field>>) -> Self {
        let mut h = Self::new(iterates.len());
        for (k, fam) in iterates.into_iter().enumerate() {
            h.push(k, fam);
        }
        h
    }

    pub fn push(&mut self, k: usize, family: Vec<Field>) {
        if self.head.len() < self.cap {
            self.head.push((k, family));
        } else {
            if self.tail.len() == TAIL_LEN {
                self.tail.pop_front();
            }
            self.tail.push_back((k, family));
        }
    }

    pub fn len(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &[Field])> {
        self.head.iter().chain(self.tail.iter()).map(|(k, f)| (*k, f.as_slice()))
    }

    /// Mutable access to a stored iterate.
    pub fn get_mut(&mut self, k: usize) -> Option<&mut Vec<Field>> {
        self.head.iter_mut().chain(self.tail.iter_mut()).find(|(kk, _)| *kk == k).map(|(_, f)| f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapIncrease {
    pub k: usize,
    pub increase: f64,
}

/// Per-species summary of one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateStats {
    pub k: usize,
    pub species: usize,
    /// `‖u_i^k - u_i^{k-1}‖∞`; `None` for `k = 0`.
    pub gap: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// Discrete outward flux through `∂Ω`.
    pub flux: f64,
}

fn stats_of(k: usize, family: &[Field], prev: Option<&[Field]>, domain: &Domain) -> Vec<IterateStats> {
    family
        .iter()
        .enumerate()
        .map(|(s, u)| IterateStats {
            k,
            species: s,
            gap: prev.map(|p| u.max_diff_on(&p[s], domain.interior())),
            min: u.min_on(domain.interior()),
            max: u.max_on(domain.interior()),
            flux: boundary_flux_sum(u, domain),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct IterationState {
    k: usize,
    current: Vec<Field>,
    previous: Option<Vec<Field>>,
    history: IterateHistory,
    /// `max_i ‖u_i^k - u_i^{k-1}‖∞` for `k = 1, 2, …`: the even/odd gap.
    gaps: Vec<f64>,
    /// `g_k = max_i ‖u_i^k - u_i^{k-2}‖∞` for `k = 2, 3, …`.
    step2: Vec<f64>,
    gap_increases: Vec<GapIncrease>,
    stats: Vec<IterateStats>,
}

impl IterationState {
    /// State at `k = 0` holding the given family.
    pub fn new(initial: Vec<Field>, history_cap: usize) -> Self {
        let mut history = IterateHistory::new(history_cap);
        history.push(0, initial.clone());
        Self {
            k: 0,
            current: initial,
            previous: None,
            history,
            gaps: Vec::new(),
            step2: Vec::new(),
            gap_increases: Vec::new(),
            stats: Vec::new(),
        }
    }

    /// Harmonic extensions of the boundary data.
    pub fn harmonic(domain: &Domain, data: &BoundaryData, history_cap: usize, lin: &LinearSolverOptions) -> Result<Self> {
        let init = data.fields().par_iter().map(|phi| harmonic_extension(phi, domain, lin)).collect::<Result<Vec<_>>>()?;
        let mut state = Self::new(init, history_cap);
        state.stats = stats_of(0, &state.current, None, domain);
        Ok(state)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn current(&self) -> &[Field] {
        &self.current
    }

    pub fn previous(&self) -> Option<&[Field]> {
        self.previous.as_deref()
    }

    pub fn history(&self) -> &IterateHistory {
        &self.history
    }

    pub fn history_mut(&mut self) -> &mut IterateHistory {
        &mut self.history
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn step2_gaps(&self) -> &[f64] {
        &self.step2
    }

    pub fn gap_increases(&self) -> &[GapIncrease] {
        &self.gap_increases
    }

    /// Per-species summaries of every iterate produced so far.
    pub fn stats(&self) -> &[IterateStats] {
        &self.stats
    }

    fn advance(&mut self, next: Vec<Field>, domain: &Domain) {
        let gap = family_max_diff(&next, &self.current, domain);
        if let Some(prev) = &self.previous {
            let g = family_max_diff(&next, prev, domain);
            if let Some(&last) = self.step2.last() {
                if g > last {
                    self.gap_increases.push(GapIncrease { k: self.k + 1, increase: g - last });
                }
            }
            self.step2.push(g);
        }
        self.gaps.push(gap);
        self.stats.extend(stats_of(self.k + 1, &next, Some(&self.current), domain));
        self.k += 1;
        self.history.push(self.k, next.clone());
        self.previous = Some(std::mem::replace(&mut self.current, next));
    }
}

/// One application of the frozen-coefficient map: every species solves its
/// screened problem with coefficients built from the same input family.
pub fn picard_map(
    family: &[Field],
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    lin: &LinearSolverOptions,
) -> Result<Vec<Field>> {
    check_eps(eps)?;
    let kernels = apply_kernel_family(family, domain, kernel);
    let coeffs = coefficients_from_kernels(&kernels, eps, domain);
    coeffs
        .par_iter()
        .zip(data.fields().par_iter())
        .map(|(c, phi)| screened_solve(c, phi, domain, lin).map(|(u, _)| u))
        .collect()
}

/// Advances the state from `u^k` to `u^{k+1}`.
pub fn picard_step(
    state: &mut IterationState,
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    lin: &LinearSolverOptions,
) -> Result<()> {
    let next = picard_map(&state.current, eps, domain, data, kernel, lin)?;
    state.advance(next, domain);
    Ok(())
}

/// `max_i ‖Δ_h u_i - (1/ε) u_i Σ_{j≠i} H(u_j)‖∞` over interior nodes.
pub fn nonlinear_residual(family: &[Field], eps: f64, domain: &Domain, kernel: &KernelSpec) -> f64 {
    let kernels = apply_kernel_family(family, domain, kernel);
    let coeffs = coefficients_from_kernels(&kernels, eps, domain);
    family
        .iter()
        .zip(&coeffs)
        .map(|(u, c)| {
            let lap = discrete_laplacian(u, domain);
            domain.interior().iter().map(|&i| (lap[i] - c[i] * u[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Residual in the units of the assembled linear systems: `h² ‖F‖∞ / ‖φ‖∞`.
pub fn scaled_residual(residual: f64, domain: &Domain, data: &BoundaryData) -> f64 {
    let scale = data.max_value();
    let r = residual * domain.h() * domain.h();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A later even iterate exceeds an earlier one.
    EvenIncrease,
    /// A later odd iterate falls below an earlier one.
    OddDecrease,
    /// An odd iterate exceeds an even iterate.
    OddAboveEven,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub species: usize,
    pub node: usize,
    pub position: Vec<f64>,
    /// Iterate indices `(a, b)` where `u^a ≥ u^b` was expected.
    pub pair: (usize, usize),
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub iterates_checked: usize,
    /// Fewer than four iterates were available.
    pub incomplete: bool,
    pub slack: f64,
    pub violations: Vec<Violation>,
    pub max_violation: f64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the interleaving chain on every stored pair of iterates and every
/// interior node: evens nonincreasing, odds nondecreasing, every odd below
/// every even. Differences within `slack` are not reported.
pub fn audit_interleaving(history: &IterateHistory, domain: &Domain, slack: f64) -> AuditReport {
    let entries: Vec<(usize, &[Field])> = history.entries().collect();
    let mut violations = Vec::new();
    let mut max_violation: f64 = 0.0;
    for (a, &(ka, fa)) in entries.iter().enumerate() {
        for &(kb, fb) in &entries[a + 1..] {
            // ka < kb; decide which should dominate.
            let (kind, hi, lo, pair) = match (ka % 2, kb % 2) {
                (0, 0) => (ViolationKind::EvenIncrease, fa, fb, (ka, kb)),
                (1, 1) => (ViolationKind::OddDecrease, fb, fa, (kb, ka)),
                (0, 1) => (ViolationKind::OddAboveEven, fa, fb, (ka, kb)),
                _ => (ViolationKind::OddAboveEven, fb, fa, (kb, ka)),
            };
            for (s, (uh, ul)) in hi.iter().zip(lo).enumerate() {
                for &idx in domain.interior() {
                    let excess = ul[idx] - uh[idx];
                    if excess > slack {
                        max_violation = max_violation.max(excess);
                        violations.push(Violation {
                            kind,
                            species: s,
                            node: idx,
                            position: domain.coords(idx)[..domain.dim()].to_vec(),
                            pair,
                            magnitude: excess,
                        });
                    }
                }
            }
        }
    }
    AuditReport { iterates_checked: entries.len(), incomplete: entries.len() < 4, slack, violations, max_violation }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub iterates_checked: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub slack: f64,
}

impl From<&AuditReport> for AuditSummary {
    fn from(r: &AuditReport) -> Self {
        Self {
            iterates_checked: r.iterates_checked,
            violations: r.violations.len(),
            max_violation: r.max_violation,
            slack: r.slack,
        }
    }
}

/// Quantities from the limit-identification argument, evaluated on the final
/// even (`ū`) and odd (`u̲`) families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    /// `Σ_i` outward flux of `ū_i`; should not exceed `flux_odd`.
    pub flux_even: f64,
    pub flux_odd: f64,
    /// `Σ_{i≠j} Σ_x Σ_{y∈collar} ū_i(x) φ_j(y) K(x,y) h^{2d}`.
    pub strip_even: f64,
    pub strip_odd: f64,
    /// `max_i ‖ū_i - u̲_i‖∞`.
    pub limit_gap: f64,
}

/// Interaction of a family with the competitors' collar data.
pub fn boundary_strip_interaction(family: &[Field], data: &BoundaryData, domain: &Domain, kernel: &KernelSpec) -> f64 {
    let collar_kernels = apply_kernel_family(data.fields(), domain, kernel);
    let vol = domain.cell_volume();
    let m = family.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            total += domain.interior().iter().map(|&x| family[i][x] * collar_kernels[j][x]).sum::<f64>() * vol;
        }
    }
    total
}

pub fn limit_diagnostics(
    even: &[Field],
    odd: &[Field],
    data: &BoundaryData,
    domain: &Domain,
    kernel: &KernelSpec,
) -> LimitDiagnostics {
    let flux = |fam: &[Field]| fam.iter().map(|u| boundary_flux_sum(u, domain)).sum::<f64>();
    let mut integral = kernel.clone();
    if kernel.kind() != KernelKind::Integral {
        integral = KernelSpec::new(KernelKind::Integral, kernel.radius(), domain).expect("radius already validated");
    }
    LimitDiagnostics {
        flux_even: flux(even),
        flux_odd: flux(odd),
        strip_even: boundary_strip_interaction(even, data, domain, &integral),
        strip_odd: boundary_strip_interaction(odd, data, domain, &integral),
        limit_gap: family_max_diff(even, odd, domain),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Monotone,
    FixedPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub fields: Vec<Field>,
    pub eps: f64,
    pub kernel: KernelKind,
    pub kernel_radius: f64,
    pub method: SolveMethod,
    pub iterations: usize,
    pub final_gap: f64,
    /// `max_i ‖Δ_h u_i - (1/ε) u_i Σ H(u_j)‖∞`.
    pub residual: f64,
    /// `h² · residual / ‖φ‖∞`.
    pub scaled_residual: f64,
    pub audit: Option<AuditSummary>,
    pub limits: Option<LimitDiagnostics>,
    /// Uniqueness is only established for the integral kernel; sup-kernel
    /// comparisons are reported but carry this flag.
    pub exploratory: bool,
    #[serde(skip)]
    pub even: Vec<Field>,
    #[serde(skip)]
    pub odd: Vec<Field>,
    pub gap_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneOptions {
    /// Stop once `max_i ‖u_i^{k} - u_i^{k-1}‖∞ < tol_outer`.
    pub tol_outer: f64,
    pub max_outer: usize,
    /// Keep at least this many steps before testing the gap.
    pub min_outer: usize,
    pub history_cap: usize,
    /// Accept the averaged solution only if its scaled residual is below this.
    pub residual_tol: f64,
    pub linear: LinearSolverOptions,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self {
            tol_outer: 1e-8,
            max_outer: 20_000,
            min_outer: 0,
            history_cap: 64,
            residual_tol: 1e-6,
            linear: LinearSolverOptions::default(),
        }
    }
}

impl MonotoneOptions {
    /// Slack for pointwise inequalities: `10 · tol_outer`.
    pub fn slack(&self) -> f64 {
        10.0 * self.tol_outer
    }
}

/// Runs the monotone scheme to convergence.
pub fn run_monotone(
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    opts: &MonotoneOptions,
) -> Result<Solution> {
    run_monotone_traced(eps, domain, data, kernel, opts).map(|(s, _)| s)
}

/// As [`run_monotone`], also returning the final iteration state.
pub fn run_monotone_traced(
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    opts: &MonotoneOptions,
) -> Result<(Solution, IterationState)> {
    check_eps(eps)?;
    let mut state = IterationState::harmonic(domain, data, opts.history_cap, &opts.linear)?;
    loop {
        picard_step(&mut state, eps, domain, data, kernel, &opts.linear)?;
        let gap = *state.gaps.last().expect("one step taken");
        if !gap.is_finite() {
            return Err(Error::Diverged { iterations: state.k, change: gap });
        }
        if gap < opts.tol_outer && state.k >= opts.min_outer.max(1) {
            break;
        }
        if state.k >= opts.max_outer {
            return Err(Error::IterationCap { cap: opts.max_outer, last_gap: gap, gap_history: state.gaps.clone() });
        }
    }
    let prev = state.previous.as_ref().expect("at least one step");
    let (even, odd) = if state.k % 2 == 0 { (state.current.clone(), prev.clone()) } else { (prev.clone(), state.current.clone()) };
    let fields: Vec<Field> = even.iter().zip(&odd).map(|(a, b)| a.combine(0.5, b, 0.5)).collect();
    let residual = nonlinear_residual(&fields, eps, domain, kernel);
    let scaled = scaled_residual(residual, domain, data);
    if !(scaled <= opts.residual_tol) {
        return Err(Error::Residual { residual: scaled, tol: opts.residual_tol });
    }
    let audit = audit_interleaving(&state.history, domain, opts.slack());
    let limits = limit_diagnostics(&even, &odd, data, domain, kernel);
    let solution = Solution {
        fields,
        eps,
        kernel: kernel.kind(),
        kernel_radius: kernel.radius(),
        method: SolveMethod::Monotone,
        iterations: state.k,
        final_gap: *state.gaps.last().unwrap(),
        residual,
        scaled_residual: scaled,
        audit: Some(AuditSummary::from(&audit)),
        limits: Some(limits),
        exploratory: kernel.kind() != KernelKind::Integral,
        even,
        odd,
        gap_history: state.gaps.clone(),
    };
    Ok((solution, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    /// Stop once `max_i ‖T(u)_i - u_i‖∞ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub linear: LinearSolverOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, residual_tol: 1e-6, linear: LinearSolverOptions::default() }
    }
}

/// Damped Picard iteration `u ← (1-θ) u + θ T(u)` from an arbitrary positive
/// family whose collar values match the data.
pub fn solve_fixed_point(
    eps: f64,
    domain: &Domain,
    data: &BoundaryData,
    kernel: &KernelSpec,
    init: Vec<Field>,
    damping: f64,
    opts: &FixedPointOptions,
) -> Result<Solution> {
    check_eps(eps)?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {damping}")));
    }
    validate_family(&init, data, domain)?;
    let mut u = init;
    let mut history = Vec::new();
    let mut first_change = None;
    for it in 1..=opts.max_iter {
        let t = picard_map(&u, eps, domain, data, kernel, &opts.linear)?;
        let change = family_max_diff(&t, &u, domain);
        history.push(change);
        let c0 = *first_change.get_or_insert(change);
        if !change.is_finite() || change > 1e6 * (c0 + 1.0) {
            return Err(Error::Diverged { iterations: it, change });
        }
        u = if damping == 1.0 { t } else { u.iter().zip(&t).map(|(a, b)| a.combine(1.0 - damping, b, damping)).collect() };
        if change < opts.tol {
            let residual = nonlinear_residual(&u, eps, domain, kernel);
            let scaled = scaled_residual(residual, domain, data);
            if !(scaled <= opts.residual_tol) {
                return Err(Error::Residual { residual: scaled, tol: opts.residual_tol });
            }
            return Ok(Solution {
                even: u.clone(),
                odd: u.clone(),
                fields: u,
                eps,
                kernel: kernel.kind(),
                kernel_radius: kernel.radius(),
                method: SolveMethod::FixedPoint,
                iterations: it,
                final_gap: change,
                residual,
                scaled_residual: scaled,
                audit: None,
                limits: None,
                exploratory: kernel.kind() != KernelKind::Integral,
                gap_history: history,
            });
        }
    }
    Err(Error::IterationCap { cap: opts.max_iter, last_gap: *history.last().unwrap_or(&f64::NAN), gap_history: history })
}

fn validate_family(family: &[Field], data: &BoundaryData, domain: &Domain) -> Result<()> {
    if family.len() != data.species_count() {
        return Err(Error::InvalidArgument(format!(
            "initial family has {} species, data has {}",
            family.len(),
            data.species_count()
        )));
    }
    for (s, (u, phi)) in family.iter().zip(data.fields()).enumerate() {
        if u.len() != domain.node_count() {
            return Err(Error::InvalidArgument(format!("species {s}: wrong field length")));
        }
        for idx in domain.active_nodes() {
            if !(u[idx].is_finite() && u[idx] >= 0.0) {
                return Err(Error::InvalidArgument(format!("species {s}: negative or non-finite initial value")));
            }
            if domain.kind(idx) == NodeKind::Collar && (u[idx] - phi[idx]).abs() > 1e-12 * (1.0 + phi[idx].abs()) {
                return Err(Error::InvalidArgument(format!("species {s}: initial collar values differ from the data")));
            }
        }
    }
    Ok(())
}

/// Family equal to the data on the collar and to `f(species, x)` inside.
pub fn family_with_interior(data: &BoundaryData, domain: &Domain, f: impl Fn(usize, usize) -> f64) -> Vec<Field> {
    data.fields()
        .iter()
        .enumerate()
        .map(|(s, phi)| {
            let mut u = phi.clone();
            for &idx in domain.interior() {
                u[idx] = f(s, idx);
            }
            u
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `max (u^{odd} - w)`; positive values mean `w` dips below the odd iterate.
    pub below_odd: f64,
    /// `max (w - u^{even})`.
    pub above_even: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks `u^{2k+1} - slack ≤ w ≤ u^{2k} + slack` at every interior node.
pub fn sandwich_check(w: &[Field], odd: &[Field], even: &[Field], domain: &Domain, slack: f64) -> SandwichReport {
    let mut below: f64 = f64::NEG_INFINITY;
    let mut above: f64 = f64::NEG_INFINITY;
    for ((wi, oi), ei) in w.iter().zip(odd).zip(even) {
        for &x in domain.interior() {
            below = below.max(oi[x] - wi[x]);
            above = above.max(wi[x] - ei[x]);
        }
    }
    SandwichReport { below_odd: below, above_even: above, slack, holds: below <= slack && above <= slack }
}

/// `H(u)` restricted to one species, exposed for diagnostics.
pub fn kernel_of(u: &Field, domain: &Domain, kernel: &KernelSpec) -> Field {
    apply_kernel(u, domain, kernel)
}
