//! Solvers for the symmetric M-matrix systems `(-h²Δ + h² diag(s)) u = b`
//! assembled on the interior nodes of a box.
//!
//! The matrix has diagonal `2d + h² s_p` and `-1` for each interior stencil
//! neighbour. Unknowns are numbered row-major over the interior block, so the
//! half-bandwidth is the length of the trailing axis.

use serde::Serialize;

/// Five-point (or three-point) shifted Laplacian on a rectangular block.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    /// Interior block shape, trailing axis is contiguous.
    pub shape: [usize; 2],
    pub diag: Vec<f64>,
}

impl StencilMatrix {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn neighbors(&self, p: usize) -> impl Iterator<Item = usize> {
        let [n0, n1] = self.shape;
        let (r, c) = (p / n1, p % n1);
        let cand = [
            (r > 0).then(|| p - n1),
            (r + 1 < n0).then(|| p + n1),
            (c > 0).then(|| p - 1),
            (c + 1 < n1).then(|| p + 1),
        ];
        cand.into_iter().flatten()
    }

    pub fn half_bandwidth(&self) -> usize {
        if self.shape[0] > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for p in 0..self.len() {
            let mut s = self.diag[p] * x[p];
            for q in self.neighbors(p) {
                s -= x[q];
            }
            y[p] = s;
        }
    }

    /// `‖b - A x‖₂ / ‖b‖₂`, or `‖b - A x‖₂` when `b = 0`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.len()];
        self.apply(x, &mut ax);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let nb = norm2(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Banded Cholesky factor `L` with `l[i * (bw + 1) + k] = L[i][i - k]`.
///
/// For an M-matrix every off-diagonal entry of `L` is nonpositive, so the
/// triangular solves only ever add nonnegative terms when `b ≥ 0`; small
/// solution values keep full relative accuracy.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &StencilMatrix) -> Option<Self> {
        let n = a.len();
        let bw = a.half_bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for p in 0..n {
            l[p * w] = a.diag[p];
            for q in a.neighbors(p) {
                if q < p {
                    l[p * w + (p - q)] = -1.0;
                }
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let k = i - j;
                let mut s = l[i * w + k];
                let lo = lo_i.max(j.saturating_sub(bw));
                for p in lo..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                if k == 0 {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + k] = s / l[j * w];
                }
            }
        }
        Some(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - p)] * y[p];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for q in (i + 1)..n.min(i + bw + 1) {
                s -= self.l[q * w + (q - i)] * y[q];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn pcg(a: &StencilMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, CgOutcome) {
    let n = a.len();
    let mut x = vec![0.0; n];
    let nb = norm2(b);
    if nb == 0.0 {
        return (x, CgOutcome { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&a.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / nb;
        if rel <= tol {
            return (x, CgOutcome { iterations: it, relative_residual: rel, converged: true });
        }
        for i in 0..n {
            z[i] = r[i] / a.diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, CgOutcome { iterations: max_iter, relative_residual: rel, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_2d(n0: usize, n1: usize, shift: f64) -> StencilMatrix {
        StencilMatrix { shape: [n0, n1], diag: vec![4.0 + shift; n0 * n1] }
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = laplace_2d(7, 5, 0.3);
        let b: Vec<f64> = (0..35).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let x = BandCholesky::factor(&a).unwrap().solve(&b);
        assert!(a.relative_residual(&x, &b) < 1e-14);
        let (y, out) = pcg(&a, &b, 1e-12, 500);
        assert!(out.converged);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiagonal_case() {
        let a = StencilMatrix { shape: [6, 1], diag: vec![2.0; 6] };
        assert_eq!(a.half_bandwidth(), 1);
        let b = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let x = BandCholesky::factor(&a).unwrap().solve(&b);
        // Discrete harmonic ramp from 1 at the left ghost to 0 at the right ghost.
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - (6 - i) as f64 / 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = StencilMatrix { shape: [3, 1], diag: vec![0.5; 3] };
        assert!(BandCholesky::factor(&a).is_none());
    }
}
