//! Finite-difference solver and experiment harness for nonlocal (long-range)
//! segregation competition systems
//!
//! ```text
//!     Δu_i = (1/ε) u_i Σ_{j≠i} H(u_j)   in Ω,     u_i = φ_i on the unit collar of Ω,
//! ```
//!
//! where `H(u)(x)` is either the integral of `u` over the unit ball around `x`
//! or its supremum there, together with the parabolic counterpart and the
//! diagnostics of the strong-competition limit `ε → 0`.

pub mod config;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod iteration;
pub mod linalg;
pub mod nonlocal;
pub mod output;
pub mod parabolic;
pub mod run;
pub mod segregation;

pub use domain::{ball_offsets, build_domain, make_boundary_data, BoundaryData, Domain, NodeKind, OffsetSet, Patch, PatchProfile, PatchValue, Profile};
pub use elliptic::{discrete_laplacian, harmonic_extension, screened_solve, LinearSolveReport, LinearSolverOptions, SolverMethod};
pub use error::{Error, Result};
pub use field::Field;
pub use iteration::{audit_interleaving, picard_step, run_monotone, solve_fixed_point, IterationState, MonotoneOptions, Solution};
pub use nonlocal::{apply_kernel, interaction_coefficient, KernelKind, KernelSpec};
