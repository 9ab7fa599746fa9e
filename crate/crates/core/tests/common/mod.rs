//! Problem builders and independent oracles shared by the integration tests.
//!
//! The oracles below only use the lattice geometry (node coordinates and
//! kinds) of the library; stencils, kernels and solves are recomputed from
//! scratch with dense linear algebra.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use segsolve::{BoundaryData, Domain, Field, KernelKind, NodeKind};

/// Two species on `(-2, 2)` with unit data on the left and right collars.
pub fn standard_1d(h: f64) -> (Domain, BoundaryData) {
    let d = Domain::new(&[-2.0], &[2.0], h).unwrap();
    let data = sided_data(&d, |_| 1.0, |_| 1.0);
    (d, data)
}

/// Two species on `(0, 3)²` fed from the left and right collars.
pub fn square_2d(h: f64) -> (Domain, BoundaryData) {
    let d = Domain::new(&[0.0, 0.0], &[3.0, 3.0], h).unwrap();
    let data = sided_data(&d, |_| 1.0, |_| 1.0);
    (d, data)
}

/// Species 0 lives on the collar left of the box, species 1 right of it.
pub fn sided_data(d: &Domain, left: impl Fn(&[f64]) -> f64, right: impl Fn(&[f64]) -> f64) -> BoundaryData {
    let lo = d.lower()[0];
    let hi = d.upper()[0];
    let l = move |x: &[f64]| if x[0] <= lo + 1e-9 { left(x) } else { 0.0 };
    let r = move |x: &[f64]| if x[0] >= hi - 1e-9 { right(x) } else { 0.0 };
    BoundaryData::from_fields(vec![Field::from_fn(d, l), Field::from_fn(d, r)], d).unwrap()
}

pub fn max_abs_diff(a: &[Field], b: &[Field], d: &Domain) -> f64 {
    let mut m: f64 = 0.0;
    for (u, v) in a.iter().zip(b) {
        for &i in d.interior() {
            m = m.max((u[i] - v[i]).abs());
        }
    }
    m
}

/// Lattice adjacency rebuilt from coordinates.
pub struct Geometry {
    pub dim: usize,
    pub h: f64,
    pub interior: Vec<usize>,
    pub position: HashMap<usize, usize>,
    /// Stencil neighbours of each interior node (in `interior` order).
    pub neighbours: Vec<Vec<usize>>,
    /// Nodes within distance 1 of each interior node (closed ball).
    pub ball: Vec<Vec<usize>>,
}

impl Geometry {
    pub fn new(d: &Domain) -> Self {
        let dim = d.dim();
        let h = d.h();
        let key = |x: [f64; 2]| ((x[0] / h).round() as i64, (x[1] / h).round() as i64);
        let nodes: Vec<usize> = (0..d.node_count()).filter(|&i| d.kind(i) != NodeKind::Outside).collect();
        let lookup: HashMap<(i64, i64), usize> = nodes.iter().map(|&i| (key(d.coords(i)), i)).collect();
        let interior: Vec<usize> = nodes.iter().copied().filter(|&i| d.kind(i) == NodeKind::Interior).collect();
        let position = interior.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut neighbours = Vec::new();
        let mut ball = Vec::new();
        for &i in &interior {
            let (a, b) = key(d.coords(i));
            let steps: &[(i64, i64)] = if dim == 1 { &[(-1, 0), (1, 0)] } else { &[(-1, 0), (1, 0), (0, -1), (0, 1)] };
            neighbours.push(steps.iter().map(|&(s, t)| lookup[&(a + s, b + t)]).collect());
            let xi = d.coords(i);
            ball.push(
                nodes
                    .iter()
                    .copied()
                    .filter(|&j| {
                        let xj = d.coords(j);
                        ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt() <= 1.0 + 1e-9
                    })
                    .collect(),
            );
        }
        Self { dim, h, interior, position, neighbours, ball }
    }

    fn volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Kernel value at interior position `p`, plus the node attaining the sup.
    pub fn kernel(&self, u: &Field, p: usize, kind: KernelKind) -> (f64, usize) {
        match kind {
            KernelKind::Integral => (self.ball[p].iter().map(|&j| u[j]).sum::<f64>() * self.volume(), usize::MAX),
            KernelKind::Sup => self.ball[p]
                .iter()
                .map(|&j| (u[j], j))
                .fold((f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 { b } else { a }),
        }
    }

    /// `Σ_x Σ_{|y-x|≤1} u(x) v(y) h^{2d}` over interior `x`.
    pub fn interaction_double_sum(&self, u: &Field, v: &Field) -> f64 {
        let mut s = 0.0;
        for (p, &x) in self.interior.iter().enumerate() {
            for &y in &self.ball[p] {
                s += u[x] * v[y];
            }
        }
        s * self.volume() * self.volume()
    }
}

/// Dense solve of `-Δu + c u = 0` with collar data, used to check the banded solver.
pub fn dense_screened(d: &Domain, c: &Field, data: &Field) -> Field {
    let g = Geometry::new(d);
    let n = g.interior.len();
    let h2 = g.h * g.h;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (p, &x) in g.interior.iter().enumerate() {
        a[(p, p)] = (2 * g.dim) as f64 / h2 + c[x];
        for &nb in &g.neighbours[p] {
            match g.position.get(&nb) {
                Some(&q) => a[(p, q)] -= 1.0 / h2,
                None => b[p] += data[nb] / h2,
            }
        }
    }
    let sol = a.lu().solve(&b).expect("nonsingular system");
    let mut u = data.clone();
    for (p, &x) in g.interior.iter().enumerate() {
        u[x] = sol[p];
    }
    u
}

pub struct NewtonResult {
    pub fields: Vec<Field>,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton on the full coupled system
/// `Δ_h u_s - (1/ε) u_s Σ_{j≠s} H(u_j) = 0` for all species at once, with a
/// dense Jacobian (generalised Jacobian of the max for the sup kernel) and
/// backtracking on `‖F‖∞`. Starts from zero interior values.
pub fn newton_oracle(d: &Domain, data: &BoundaryData, eps: f64, kind: KernelKind) -> NewtonResult {
    let g = Geometry::new(d);
    let m = data.species_count();
    let n = g.interior.len();
    let h2 = g.h * g.h;
    let vol = g.volume();
    let dd = (2 * g.dim) as f64;

    let assemble = |x: &DVector<f64>| -> Vec<Field> {
        (0..m)
            .map(|s| {
                let mut u = data.species(s).clone();
                for (p, &i) in g.interior.iter().enumerate() {
                    u[i] = x[s * n + p];
                }
                u
            })
            .collect()
    };
    let residual = |fields: &[Field]| -> DVector<f64> {
        let mut f = DVector::zeros(m * n);
        for s in 0..m {
            for (p, &x) in g.interior.iter().enumerate() {
                let lap = (g.neighbours[p].iter().map(|&j| fields[s][j]).sum::<f64>() - dd * fields[s][x]) / h2;
                let coupling: f64 = (0..m).filter(|&j| j != s).map(|j| g.kernel(&fields[j], p, kind).0).sum();
                f[s * n + p] = lap - fields[s][x] * coupling / eps;
            }
        }
        f
    };

    let mut x = DVector::<f64>::zeros(m * n);
    let mut fields = assemble(&x);
    let mut f = residual(&fields);
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let mut jac = DMatrix::<f64>::zeros(m * n, m * n);
        for s in 0..m {
            for (p, &xi) in g.interior.iter().enumerate() {
                let row = s * n + p;
                let coupling: f64 = (0..m).filter(|&j| j != s).map(|j| g.kernel(&fields[j], p, kind).0).sum();
                jac[(row, row)] += -dd / h2 - coupling / eps;
                for &nb in &g.neighbours[p] {
                    if let Some(&q) = g.position.get(&nb) {
                        jac[(row, s * n + q)] += 1.0 / h2;
                    }
                }
                let us = fields[s][xi];
                for j in (0..m).filter(|&j| j != s) {
                    match kind {
                        KernelKind::Integral => {
                            for &y in &g.ball[p] {
                                if let Some(&q) = g.position.get(&y) {
                                    jac[(row, j * n + q)] -= us * vol / eps;
                                }
                            }
                        }
                        KernelKind::Sup => {
                            let (_, arg) = g.kernel(&fields[j], p, kind);
                            if let Some(&q) = g.position.get(&arg) {
                                jac[(row, j * n + q)] -= us / eps;
                            }
                        }
                    }
                }
            }
        }
        let step = jac.lu().solve(&(-&f)).expect("nonsingular Jacobian");
        let f_norm = f.amax();
        let mut alpha = 1.0;
        loop {
            let trial = &x + &step * alpha;
            let tf = assemble(&trial);
            let tr = residual(&tf);
            if tr.amax() < (1.0 - 1e-4 * alpha) * f_norm || alpha < 1e-10 {
                x = trial;
                fields = tf;
                f = tr;
                break;
            }
            alpha *= 0.5;
        }
        if step.amax() * alpha < 1e-14 || f.amax() * h2 < 1e-15 {
            break;
        }
    }
    NewtonResult { residual: f.amax(), fields, iterations }
}
