use std::ops::{Index, IndexMut};

use crate::domain::Domain;

/// Scalar grid function over the whole lattice (interior, collar and the
/// unused outside corners, which stay zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(domain: &Domain) -> Self {
        Self { values: vec![0.0; domain.node_count()] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Evaluates `f` at the coordinates of every interior and collar node.
    pub fn from_fn(domain: &Domain, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut field = Self::zeros(domain);
        for idx in domain.active_nodes() {
            field.values[idx] = f(&domain.coords(idx)[..domain.dim()]);
        }
        field
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Max-norm of `self - other` over the given node indices.
    pub fn max_diff_on(&self, other: &Field, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| (self.values[i] - other.values[i]).abs()).fold(0.0, f64::max)
    }

    pub fn max_on(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_on(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Field { values }
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Max over species of the interior max-norm difference.
pub fn family_max_diff(a: &[Field], b: &[Field], domain: &Domain) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_diff_on(y, domain.interior())).fold(0.0, f64::max)
}
