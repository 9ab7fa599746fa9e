//! Discrete Laplacian and the linear Dirichlet problems every iteration step
//! reduces to: harmonic extension and the screened problem `Δu = c u`.
//!
//! Dirichlet data enters the stencil straight from the collar nodes. The
//! assembled matrix `-Δ_h + diag(c)` is an M-matrix for `c ≥ 0`, which gives
//! the discrete maximum and comparison principles used throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, NodeKind};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::{pcg, BandCholesky, StencilMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Banded Cholesky factorization.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverMethod::Direct => f.write_str("direct"),
            SolverMethod::Cg => f.write_str("cg"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSolverOptions {
    pub method: SolverMethod,
    /// Relative residual bound `‖b - Au‖₂ / ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        Self { method: SolverMethod::Direct, tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSolveReport {
    pub method: SolverMethod,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl fmt::Display for LinearSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} iterations, relative residual {:.3e}", self.method, self.iterations, self.relative_residual)
    }
}

/// `(Σ_neighbours u - 2d u(x)) / h²` at interior nodes; zero elsewhere.
pub fn discrete_laplacian(u: &Field, domain: &Domain) -> Field {
    let mut out = Field::zeros(domain);
    let inv_h2 = 1.0 / (domain.h() * domain.h());
    let dd = 2.0 * domain.dim() as f64;
    for &idx in domain.interior() {
        let s: f64 = domain.stencil_neighbors(idx).map(|nb| u[nb]).sum();
        out[idx] = (s - dd * u[idx]) * inv_h2;
    }
    out
}

/// Solves `-Δu + s u = f` on the interior with `u = g` on the collar.
///
/// `shift` and `source` are read at interior nodes only (`None` means zero).
/// The returned field carries the collar values of `boundary`.
pub fn solve_shifted(
    domain: &Domain,
    shift: Option<&Field>,
    source: Option<&Field>,
    boundary: &Field,
    opts: &LinearSolverOptions,
) -> Result<(Field, LinearSolveReport)> {
    let h2 = domain.h() * domain.h();
    let dd = 2.0 * domain.dim() as f64;
    let interior = domain.interior();
    let mut diag = Vec::with_capacity(interior.len());
    let mut rhs = Vec::with_capacity(interior.len());
    for &idx in interior {
        let s = shift.map_or(0.0, |c| c[idx]);
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidArgument(format!("shift must be finite and nonnegative, got {s}")));
        }
        diag.push(dd + h2 * s);
        let mut b = h2 * source.map_or(0.0, |f| f[idx]);
        for nb in domain.stencil_neighbors(idx) {
            if domain.kind(nb) == NodeKind::Collar {
                b += boundary[nb];
            }
        }
        rhs.push(b);
    }
    let a = StencilMatrix { shape: domain.interior_shape(), diag };

    let (x, report) = match opts.method {
        SolverMethod::Direct => {
            let chol = BandCholesky::factor(&a).ok_or(Error::LinearSolve {
                report: LinearSolveReport { method: SolverMethod::Direct, iterations: 0, relative_residual: f64::NAN },
            })?;
            let x = chol.solve(&rhs);
            let rel = a.relative_residual(&x, &rhs);
            (x, LinearSolveReport { method: SolverMethod::Direct, iterations: 1, relative_residual: rel })
        }
        SolverMethod::Cg => {
            let (mut x, out) = pcg(&a, &rhs, opts.tol, opts.max_iter);
            // Roundoff can leave values a hair below zero where the exact solution is tiny.
            for v in &mut x {
                *v = v.max(0.0);
            }
            (x, LinearSolveReport { method: SolverMethod::Cg, iterations: out.iterations, relative_residual: out.relative_residual })
        }
    };
    if !(report.relative_residual <= opts.tol) {
        return Err(Error::LinearSolve { report });
    }

    let mut u = Field::zeros(domain);
    for &idx in domain.collar() {
        u[idx] = boundary[idx];
    }
    for (p, &idx) in interior.iter().enumerate() {
        u[idx] = x[p];
    }
    Ok((u, report))
}

/// Discrete harmonic function with the collar values of `data`.
pub fn harmonic_extension(data: &Field, domain: &Domain, opts: &LinearSolverOptions) -> Result<Field> {
    solve_shifted(domain, None, None, data, opts).map(|(u, _)| u)
}

/// Solves `Δu = c(x) u` in the interior with Dirichlet collar data.
pub fn screened_solve(
    c: &Field,
    data: &Field,
    domain: &Domain,
    opts: &LinearSolverOptions,
) -> Result<(Field, LinearSolveReport)> {
    solve_shifted(domain, Some(c), None, data, opts)
}

/// Sum over stencil links crossing `∂Ω` of `(u(collar) - u(interior)) h^{d-2}`,
/// which equals `Σ_x Δ_h u(x) h^d` over the interior: the discrete outward flux.
pub fn boundary_flux_sum(u: &Field, domain: &Domain) -> f64 {
    let scale = domain.h().powi(domain.dim() as i32 - 2);
    domain.boundary_links().iter().map(|&(i, c)| (u[c] - u[i]) * scale).sum()
}
