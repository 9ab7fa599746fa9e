//! Discrete geometry: a box `Ω` in one or two dimensions, the lattice of
//! spacing `h` that covers it, and the width-one Dirichlet collar around it.
//!
//! Every lattice node is classified as interior (strictly inside the open
//! box), collar (outside the open box but within `1 + h/2` of it, including
//! the box faces themselves) or outside (corner nodes of the padded lattice
//! that are farther than that). The collar is wide enough that any offset of
//! length at most one from an interior node lands on an interior or collar
//! node, so nonlocal operators of radius one never read an undefined value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;

/// Relative slack used when comparing lattice distances to radii.
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Interior,
    Collar,
    Outside,
}

#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    h: f64,
    cells: [usize; 2],
    pad: usize,
    shape: [usize; 2],
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    collar: Vec<usize>,
    active: Vec<usize>,
    interior_pos: Vec<usize>,
    /// (interior node, collar neighbour) pairs of the 2d+1 point stencil.
    boundary_links: Vec<(usize, usize)>,
}

/// Builds the lattice for the open box `(lower, upper)` with spacing `h`.
pub fn build_domain(lower: &[f64], upper: &[f64], h: f64) -> Result<Domain> {
    Domain::new(lower, upper, h)
}

impl Domain {
    pub fn new(lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim {
            return Err(Error::Geometry(format!(
                "corners must both have length 1 or 2 (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Geometry(format!("spacing must be positive, got {h}")));
        }
        if h > 0.5 + GEOM_EPS {
            return Err(Error::CollarUnderResolved { h });
        }
        let mut cells = [1usize; 2];
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..dim {
            let side = upper[a] - lower[a];
            if !(side.is_finite() && side > 0.0) {
                return Err(Error::Geometry(format!("degenerate box along axis {a}")));
            }
            let n = side / h;
            let rounded = n.round();
            if (n - rounded).abs() > GEOM_EPS * n.max(1.0) {
                return Err(Error::NonCommensurate { side, h });
            }
            if rounded < 2.0 {
                return Err(Error::Geometry(format!("axis {a} has no interior node")));
            }
            cells[a] = rounded as usize;
            lo[a] = lower[a];
            hi[a] = upper[a];
        }
        let pad = (1.0 / h - GEOM_EPS).ceil() as usize;
        let mut shape = [1usize; 2];
        for a in 0..dim {
            shape[a] = cells[a] + 1 + 2 * pad;
        }

        let total = shape[0] * shape[1];
        let mut domain = Domain {
            dim,
            lower: lo,
            upper: hi,
            h,
            cells,
            pad,
            shape,
            kinds: vec![NodeKind::Outside; total],
            interior: Vec::new(),
            collar: Vec::new(),
            active: Vec::new(),
            interior_pos: vec![usize::MAX; total],
            boundary_links: Vec::new(),
        };
        let reach = 1.0 + 0.5 * h + GEOM_EPS;
        for idx in 0..total {
            let ij = domain.lattice_ij(idx);
            let inside = (0..dim).all(|a| {
                let rel = ij[a] as i64 - pad as i64;
                rel >= 1 && rel < cells[a] as i64
            });
            let kind = if inside {
                NodeKind::Interior
            } else if domain.dist_to_box(idx) <= reach {
                NodeKind::Collar
            } else {
                NodeKind::Outside
            };
            domain.kinds[idx] = kind;
            match kind {
                NodeKind::Interior => {
                    domain.interior_pos[idx] = domain.interior.len();
                    domain.interior.push(idx);
                    domain.active.push(idx);
                }
                NodeKind::Collar => {
                    domain.collar.push(idx);
                    domain.active.push(idx);
                }
                NodeKind::Outside => {}
            }
        }
        let mut links = Vec::new();
        for &idx in &domain.interior {
            for nb in domain.stencil_neighbors(idx) {
                if domain.kinds[nb] == NodeKind::Collar {
                    links.push((idx, nb));
                }
            }
        }
        domain.boundary_links = links;
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    /// Number of cells of width `h` along each axis of the box.
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    /// Lattice nodes per axis (box plus collar padding); trailing axis is 1 in 1D.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Number of collar layers beyond each box face.
    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Interior lattice indices in row-major order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn collar(&self) -> &[usize] {
        &self.collar
    }

    /// Interior and collar nodes.
    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().copied()
    }

    /// Position of a lattice node in the interior ordering, if interior.
    pub fn interior_position(&self, idx: usize) -> Option<usize> {
        let p = self.interior_pos[idx];
        (p != usize::MAX).then_some(p)
    }

    /// Interior nodes per axis; trailing axis is 1 in 1D.
    pub fn interior_shape(&self) -> [usize; 2] {
        let mut s = [1usize; 2];
        for a in 0..self.dim {
            s[a] = self.cells[a] - 1;
        }
        s
    }

    pub fn boundary_links(&self) -> &[(usize, usize)] {
        &self.boundary_links
    }

    pub fn lattice_ij(&self, idx: usize) -> [usize; 2] {
        [idx / self.shape[1], idx % self.shape[1]]
    }

    pub fn lattice_index(&self, ij: [usize; 2]) -> usize {
        ij[0] * self.shape[1] + ij[1]
    }

    /// Physical coordinates of a lattice node (trailing entry is 0 in 1D).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let ij = self.lattice_ij(idx);
        let mut x = [0.0; 2];
        for a in 0..self.dim {
            x[a] = self.lower[a] + (ij[a] as f64 - self.pad as f64) * self.h;
        }
        x
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, xb) = (self.coords(a), self.coords(b));
        ((xa[0] - xb[0]).powi(2) + (xa[1] - xb[1]).powi(2)).sqrt()
    }

    /// Euclidean distance from a node to the closed box.
    pub fn dist_to_box(&self, idx: usize) -> f64 {
        let x = self.coords(idx);
        let mut s = 0.0;
        for a in 0..self.dim {
            let d = (self.lower[a] - x[a]).max(x[a] - self.upper[a]).max(0.0);
            s += d * d;
        }
        s.sqrt()
    }

    /// Lattice index of `idx` shifted by an integer offset, if it stays on the lattice.
    pub fn shifted(&self, idx: usize, offset: [i32; 2]) -> Option<usize> {
        let ij = self.lattice_ij(idx);
        let mut out = [0usize; 2];
        for a in 0..2 {
            let v = ij[a] as i64 + offset[a] as i64;
            if v < 0 || v >= self.shape[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.lattice_index(out))
    }

    /// Linear index delta for an offset (valid only when the shifted node exists).
    pub fn offset_delta(&self, offset: [i32; 2]) -> isize {
        offset[0] as isize * self.shape[1] as isize + offset[1] as isize
    }

    /// Axis neighbours used by the 2d+1 point Laplacian.
    pub fn stencil_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let offsets: [[i32; 2]; 4] = [[-1, 0], [1, 0], [0, -1], [0, 1]];
        let n = 2 * self.dim;
        offsets.into_iter().take(n).filter_map(move |o| self.shifted(idx, o))
    }

    /// Nearest lattice node to a point (ignores classification).
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let r = ((x[a] - self.lower[a]) / self.h).round() as i64 + self.pad as i64;
            if r < 0 || r >= self.shape[a] as i64 {
                return None;
            }
            ij[a] = r as usize;
        }
        Some(self.lattice_index(ij))
    }
}

/// Lattice offsets inside a closed ball, with the quadrature weight `h^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSet {
    dim: usize,
    h: f64,
    radius: f64,
    offsets: Vec<[i32; 2]>,
}

impl OffsetSet {
    pub fn offsets(&self) -> &[[i32; 2]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
}

/// All lattice offsets `δ` (multiples of `h` per axis) with `|δ| <= radius`.
pub fn ball_offsets(h: f64, radius: f64, dim: usize) -> Result<OffsetSet> {
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
    }
    if !(h > 0.0 && radius > 0.0 && h.is_finite() && radius.is_finite()) {
        return Err(Error::InvalidArgument("radius and spacing must be positive".into()));
    }
    let r = radius / h;
    let r2 = r * r * (1.0 + GEOM_EPS);
    let n = (r + GEOM_EPS).floor() as i32;
    let span = if dim == 2 { n } else { 0 };
    let mut offsets = Vec::new();
    for i in -n..=n {
        for j in -span..=span {
            if (i * i + j * j) as f64 <= r2 {
                offsets.push([i, j]);
            }
        }
    }
    Ok(OffsetSet { dim, h, radius, offsets })
}

/// A nonnegative boundary profile evaluated at collar node coordinates.
pub trait Profile {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Profile for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl Profile for Box<dyn Profile + Send + Sync> {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PatchValue {
    Constant(f64),
    /// Linear along `axis` from `at_lower` to `at_upper` across the patch.
    Linear { axis: usize, at_lower: f64, at_upper: f64 },
}

/// Axis-aligned closed box carrying a constant or linear value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub value: PatchValue,
}

impl Patch {
    fn contains(&self, x: &[f64]) -> bool {
        self.lower.iter().zip(&self.upper).zip(x).all(|((lo, hi), xi)| {
            *xi >= lo - GEOM_EPS && *xi <= hi + GEOM_EPS
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self.value {
            PatchValue::Constant(v) => v,
            PatchValue::Linear { axis, at_lower, at_upper } => {
                let (lo, hi) = (self.lower[axis], self.upper[axis]);
                let t = if hi > lo { ((x[axis] - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
                at_lower + t * (at_upper - at_lower)
            }
        }
    }
}

/// Piecewise profile: the max over all patches containing the point, else 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PatchProfile {
    pub patches: Vec<Patch>,
}

impl Profile for PatchProfile {
    fn value(&self, x: &[f64]) -> f64 {
        self.patches.iter().filter(|p| p.contains(x)).map(|p| p.eval(x)).fold(0.0, f64::max)
    }
}

/// Per-species Dirichlet data on the collar; interior entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    fields: Vec<Field>,
}

impl BoundaryData {
    /// Wraps collar values, zeroing interior entries and validating sign and separation.
    pub fn from_fields(mut fields: Vec<Field>, domain: &Domain) -> Result<Self> {
        for (s, f) in fields.iter_mut().enumerate() {
            if f.len() != domain.node_count() {
                return Err(Error::InvalidArgument(format!(
                    "species {s}: expected {} values, got {}",
                    domain.node_count(),
                    f.len()
                )));
            }
            for idx in 0..f.len() {
                match domain.kind(idx) {
                    NodeKind::Collar => {
                        let v = f[idx];
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(Error::BadBoundaryValue {
                                species: s,
                                position: domain.coords(idx)[..domain.dim()].to_vec(),
                            });
                        }
                    }
                    _ => f[idx] = 0.0,
                }
            }
        }
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                if let Some(idx) = separation_violation(&fields[i], &fields[j], domain) {
                    return Err(Error::SeparationViolated {
                        i,
                        j,
                        position: domain.coords(idx)[..domain.dim()].to_vec(),
                    });
                }
            }
        }
        Ok(Self { fields })
    }

    pub fn species_count(&self) -> usize {
        self.fields.len()
    }

    pub fn species(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// `max_i ‖φ_i‖∞`.
    pub fn max_value(&self) -> f64 {
        self.fields.iter().flat_map(|f| f.as_slice().iter().copied()).fold(0.0, f64::max)
    }
}

/// Evaluates each profile on the collar (zero extension elsewhere) and checks
/// admissibility.
pub fn make_boundary_data<P: Profile>(profiles: &[P], domain: &Domain) -> Result<BoundaryData> {
    let fields = profiles
        .iter()
        .map(|p| {
            let mut f = Field::zeros(domain);
            for &idx in domain.collar() {
                f[idx] = p.value(&domain.coords(idx)[..domain.dim()]);
            }
            f
        })
        .collect();
    BoundaryData::from_fields(fields, domain)
}

/// First collar node of the lower-indexed support that lies within distance one
/// of the other support, if any. Symmetric in its two field arguments up to
/// which witness node is returned.
pub fn separation_violation(a: &Field, b: &Field, domain: &Domain) -> Option<usize> {
    let supp_a: Vec<usize> = domain.collar().iter().copied().filter(|&i| a[i] > 0.0).collect();
    let supp_b: Vec<usize> = domain.collar().iter().copied().filter(|&i| b[i] > 0.0).collect();
    let limit = 1.0 + GEOM_EPS;
    for &y in &supp_a {
        for &z in &supp_b {
            if domain.distance(y, z) <= limit {
                return Some(y.min(z));
            }
        }
    }
    None
}
