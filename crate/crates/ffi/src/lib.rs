//! C ABI for the segsolve solver.
//!
//! Objects cross the boundary as opaque handles created by `seg_*_new` or
//! `seg_solve_*` and released by the matching `seg_*_free`. Every fallible
//! call returns a [`SegStatus`]; on failure the message is kept per thread
//! and can be copied out with [`seg_last_error_message`]. Panics never
//! unwind into the caller: they are reported as `SEG_STATUS_PANIC`.
//!
//! Field buffers hold one value per lattice node, in the node order of the
//! domain (`seg_domain_node_count` entries, see `seg_domain_node`).
//! Multi-species buffers concatenate the species.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use segsolve::config::{parse_config_for, Command};
use segsolve::domain::{BoundaryData, Domain, NodeKind};
use segsolve::error::Error;
use segsolve::field::Field;
use segsolve::iteration::{run_monotone, solve_fixed_point, FixedPointOptions, MonotoneOptions, Solution};
use segsolve::nonlocal::{KernelKind, KernelSpec};
use segsolve::run::execute;

/// Integral over the closed ball.
pub const SEG_KERNEL_INTEGRAL: u32 = 0;
/// Supremum over the closed ball.
pub const SEG_KERNEL_SUP: u32 = 1;

pub const SEG_NODE_INTERIOR: u32 = 0;
pub const SEG_NODE_COLLAR: u32 = 1;
pub const SEG_NODE_OUTSIDE: u32 = 2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Separation = 4,
    LinearSolve = 5,
    NoConvergence = 6,
    Residual = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

impl From<&Error> for SegStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Geometry(_) | Error::CollarUnderResolved { .. } | Error::NonCommensurate { .. } => Self::Geometry,
            Error::SeparationViolated { .. } => Self::Separation,
            Error::LinearSolve { .. } => Self::LinearSolve,
            Error::IterationCap { .. } | Error::Diverged { .. } => Self::NoConvergence,
            Error::Residual { .. } => Self::Residual,
            Error::Config(_) => Self::Config,
            Error::Io(_) | Error::Json(_) => Self::Io,
            Error::InvalidArgument(_)
            | Error::BadBoundaryValue { .. }
            | Error::EmptyBoundarySet { .. }
            | Error::NoCrossing { .. } => Self::InvalidArgument,
        }
    }
}

/// Lattice over an open box with its unit collar.
pub struct SegDomain {
    inner: Domain,
}

/// Per-species Dirichlet data on the collar of a domain.
pub struct SegBoundary {
    inner: BoundaryData,
    node_count: usize,
}

/// Converged solution family with its diagnostics.
pub struct SegSolution {
    inner: Solution,
}

/// Tolerances for the solve calls; obtain defaults from
/// [`seg_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegSolveOptions {
    /// Monotone scheme: stop once consecutive iterates differ by less than this.
    pub tol_outer: f64,
    /// Damped fixed point: stop once the update falls below this.
    pub fixed_point_tol: f64,
    /// Cap on outer iterations for either scheme.
    pub max_iter: usize,
    /// Bound on the scaled nonlinear residual of the result.
    pub residual_tol: f64,
    /// Relaxation weight of the damped fixed point, in (0, 1].
    pub damping: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SegStatus,
    message: String,
}

impl Failure {
    fn new(status: SegStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn null(what: &str) -> Self {
        Self::new(SegStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(SegStatus::InvalidArgument, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { status: SegStatus::from(&e), message: e.to_string() }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            SegStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            SegStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn clear_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output handle pointer"));
    }
    *out = ptr::null_mut();
    Ok(())
}

fn kernel_kind(kind: u32) -> Result<KernelKind, Failure> {
    match kind {
        SEG_KERNEL_INTEGRAL => Ok(KernelKind::Integral),
        SEG_KERNEL_SUP => Ok(KernelKind::Sup),
        other => Err(Failure::invalid(format!("unknown kernel kind {other}"))),
    }
}

fn options_or_default(opts: *const SegSolveOptions) -> SegSolveOptions {
    // SAFETY: the caller passes either null or a valid options struct.
    unsafe { opts.as_ref() }.copied().unwrap_or_else(|| seg_solve_options_default())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length in bytes,
/// excluding the terminator. Returns 0 when the last call succeeded. Pass a
/// null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn seg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn seg_status_name(status: SegStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SegStatus::Ok => c"ok",
        SegStatus::NullPointer => c"null_pointer",
        SegStatus::InvalidArgument => c"invalid_argument",
        SegStatus::Geometry => c"geometry",
        SegStatus::Separation => c"separation",
        SegStatus::LinearSolve => c"linear_solve",
        SegStatus::NoConvergence => c"no_convergence",
        SegStatus::Residual => c"residual",
        SegStatus::Config => c"config",
        SegStatus::Io => c"io",
        SegStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Default tolerances (outer 1e-8, fixed point 1e-10, 20000 iterations,
/// scaled residual 1e-6, damping 0.5).
#[no_mangle]
pub extern "C" fn seg_solve_options_default() -> SegSolveOptions {
    let m = MonotoneOptions::default();
    let f = FixedPointOptions::default();
    SegSolveOptions {
        tol_outer: m.tol_outer,
        fixed_point_tol: f.tol,
        max_iter: m.max_outer,
        residual_tol: m.residual_tol,
        damping: 0.5,
    }
}

/// Builds the lattice for the open box `(lower, upper)` of dimension `dim`
/// (1 or 2) with spacing `h`.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn seg_domain_new(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    h: f64,
    out: *mut *mut SegDomain,
) -> SegStatus {
    guard(|| {
        clear_out(out)?;
        if !(1..=2).contains(&dim) {
            return Err(Failure::new(SegStatus::Geometry, format!("dimension must be 1 or 2, got {dim}")));
        }
        let lo = slice(lower, dim, "lower")?;
        let hi = slice(upper, dim, "upper")?;
        let inner = Domain::new(lo, hi, h)?;
        *out = Box::into_raw(Box::new(SegDomain { inner }));
        Ok(())
    })
}

/// Releases a domain; null is ignored.
///
/// # Safety
/// `domain` must be null or a handle from `seg_domain_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seg_domain_free(domain: *mut SegDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `domain` must be null or a live domain handle.
#[no_mangle]
pub unsafe extern "C" fn seg_domain_dim(domain: *const SegDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.inner.dim())
}

/// Number of lattice nodes (the length of one field buffer), or 0 for a
/// null handle.
///
/// # Safety
/// `domain` must be null or a live domain handle.
#[no_mangle]
pub unsafe extern "C" fn seg_domain_node_count(domain: *const SegDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.inner.node_count())
}

/// Writes the coordinates of node `index` to `xy[0..2]` (the second entry is
/// 0 in 1D) and its kind (`SEG_NODE_*`) to `kind` when non-null.
///
/// # Safety
/// `domain` must be a live handle, `xy` must point to two writable doubles,
/// `kind` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn seg_domain_node(
    domain: *const SegDomain,
    index: usize,
    xy: *mut f64,
    kind: *mut u32,
) -> SegStatus {
    guard(|| {
        let d = &handle(domain, "domain")?.inner;
        if xy.is_null() {
            return Err(Failure::null("xy"));
        }
        if index >= d.node_count() {
            return Err(Failure::invalid(format!("node {index} out of range ({} nodes)", d.node_count())));
        }
        let c = d.coords(index);
        *xy = c[0];
        *xy.add(1) = c[1];
        if !kind.is_null() {
            *kind = match d.kind(index) {
                NodeKind::Interior => SEG_NODE_INTERIOR,
                NodeKind::Collar => SEG_NODE_COLLAR,
                NodeKind::Outside => SEG_NODE_OUTSIDE,
            };
        }
        Ok(())
    })
}

/// Wraps Dirichlet data for `species` species. `values` holds
/// `species * node_count` doubles; only collar entries are read. Data must be
/// finite, nonnegative and pairwise separated by more than the unit radius.
///
/// # Safety
/// `domain` must be a live handle; `values` must point to the stated number
/// of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn seg_boundary_new(
    domain: *const SegDomain,
    species: usize,
    values: *const f64,
    out: *mut *mut SegBoundary,
) -> SegStatus {
    guard(|| {
        clear_out(out)?;
        let d = &handle(domain, "domain")?.inner;
        if species == 0 {
            return Err(Failure::invalid("at least one species is required"));
        }
        let n = d.node_count();
        let total = species.checked_mul(n).ok_or_else(|| Failure::invalid("buffer size overflows"))?;
        let vals = slice(values, total, "values")?;
        let fields = vals.chunks(n).map(|c| Field::from_values(c.to_vec())).collect();
        let inner = BoundaryData::from_fields(fields, d)?;
        *out = Box::into_raw(Box::new(SegBoundary { inner, node_count: n }));
        Ok(())
    })
}

/// Releases boundary data; null is ignored.
///
/// # Safety
/// `boundary` must be null or a handle from `seg_boundary_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seg_boundary_free(boundary: *mut SegBoundary) {
    if !boundary.is_null() {
        drop(Box::from_raw(boundary));
    }
}

struct Problem<'a> {
    domain: &'a Domain,
    data: &'a BoundaryData,
    kernel: KernelSpec,
}

unsafe fn problem<'a>(
    domain: *const SegDomain,
    boundary: *const SegBoundary,
    kernel: u32,
    radius: f64,
) -> Result<Problem<'a>, Failure> {
    let d = &handle(domain, "domain")?.inner;
    let b = handle(boundary, "boundary")?;
    if b.node_count != d.node_count() {
        return Err(Failure::invalid("boundary data was built for a different domain"));
    }
    let kernel = KernelSpec::new(kernel_kind(kernel)?, radius, d)?;
    Ok(Problem { domain: d, data: &b.inner, kernel })
}

/// Solves the coupled system with the monotone scheme started from the
/// harmonic extension. `opts` may be null for defaults.
///
/// # Safety
/// Handles must be live and belong to the same domain; `opts` must be null
/// or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn seg_solve_monotone(
    domain: *const SegDomain,
    boundary: *const SegBoundary,
    kernel: u32,
    radius: f64,
    eps: f64,
    opts: *const SegSolveOptions,
    out: *mut *mut SegSolution,
) -> SegStatus {
    guard(|| {
        clear_out(out)?;
        let p = problem(domain, boundary, kernel, radius)?;
        let o = options_or_default(opts);
        let mo = MonotoneOptions {
            tol_outer: o.tol_outer,
            max_outer: o.max_iter,
            residual_tol: o.residual_tol,
            ..MonotoneOptions::default()
        };
        let inner = run_monotone(eps, p.domain, p.data, &p.kernel, &mo)?;
        *out = Box::into_raw(Box::new(SegSolution { inner }));
        Ok(())
    })
}

/// Solves the coupled system with the damped fixed-point iteration. `init`
/// holds `species * node_count` doubles (nonnegative, matching the data on
/// the collar) or is null to start from the data with unit interior values.
///
/// # Safety
/// As for `seg_solve_monotone`; `init` must be null or point to the stated
/// number of doubles.
#[no_mangle]
pub unsafe extern "C" fn seg_solve_fixed_point(
    domain: *const SegDomain,
    boundary: *const SegBoundary,
    kernel: u32,
    radius: f64,
    eps: f64,
    init: *const f64,
    opts: *const SegSolveOptions,
    out: *mut *mut SegSolution,
) -> SegStatus {
    guard(|| {
        clear_out(out)?;
        let p = problem(domain, boundary, kernel, radius)?;
        let o = options_or_default(opts);
        let n = p.domain.node_count();
        let m = p.data.species_count();
        let start: Vec<Field> = if init.is_null() {
            segsolve::iteration::family_with_interior(p.data, p.domain, |_, _| 1.0)
        } else {
            slice(init, m * n, "init")?.chunks(n).map(|c| Field::from_values(c.to_vec())).collect()
        };
        let fo = FixedPointOptions {
            tol: o.fixed_point_tol,
            max_iter: o.max_iter,
            residual_tol: o.residual_tol,
            ..FixedPointOptions::default()
        };
        let inner = solve_fixed_point(eps, p.domain, p.data, &p.kernel, start, o.damping, &fo)?;
        *out = Box::into_raw(Box::new(SegSolution { inner }));
        Ok(())
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `solution` must be null or a handle from a solve call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_free(solution: *mut SegSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of species, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_species_count(solution: *const SegSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.fields.len())
}

/// Outer iterations performed, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_iterations(solution: *const SegSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.iterations)
}

/// Last outer-iteration gap, or NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_final_gap(solution: *const SegSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.final_gap)
}

/// Scaled nonlinear residual `h² · max|F| / max φ`, or NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_residual(solution: *const SegSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.scaled_residual)
}

/// Interleaving violations found by the monotone audit, or -1 when no audit
/// was run (fixed-point solutions) or the handle is null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_audit_violations(solution: *const SegSolution) -> i64 {
    solution
        .as_ref()
        .and_then(|s| s.inner.audit.as_ref())
        .map_or(-1, |a| i64::try_from(a.violations).unwrap_or(i64::MAX))
}

/// Copies species `species` into `buf`, which must hold exactly `len`
/// doubles with `len` equal to the node count of the domain.
///
/// # Safety
/// `solution` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn seg_solution_copy_field(
    solution: *const SegSolution,
    species: usize,
    buf: *mut f64,
    len: usize,
) -> SegStatus {
    guard(|| {
        let s = &handle(solution, "solution")?.inner;
        let f = s
            .fields
            .get(species)
            .ok_or_else(|| Failure::invalid(format!("species {species} out of range ({})", s.fields.len())))?;
        if len != f.len() {
            return Err(Failure::invalid(format!("buffer holds {len} values, field has {}", f.len())));
        }
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        ptr::copy_nonoverlapping(f.as_slice().as_ptr(), buf, len);
        Ok(())
    })
}

/// Runs a TOML configuration exactly like the command-line tool and writes
/// its artifacts to `out_dir`. `command` is "solve", "sweep", "parabolic" or
/// "fb1d", or null to use the `command` key of the configuration.
///
/// # Safety
/// All strings must be null or NUL-terminated; `config` and `out_dir` must
/// not be null.
#[no_mangle]
pub unsafe extern "C" fn seg_run_config(config: *const c_char, command: *const c_char, out_dir: *const c_char) -> SegStatus {
    guard(|| {
        let cfg_text = text(config, "config")?;
        let out = text(out_dir, "out_dir")?;
        let cmd = if command.is_null() {
            None
        } else {
            let c = text(command, "command")?;
            Some(Command::parse(c).ok_or_else(|| Failure::invalid(format!("unknown command `{c}`")))?)
        };
        let cfg = parse_config_for(cfg_text, cmd)?;
        execute(&cfg, cfg_text, Path::new(out))?;
        Ok(())
    })
}
