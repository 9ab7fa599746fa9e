//! Long-range coupling `H(u)(x)` over the closed ball of radius `R` around each
//! interior node: either the quadrature sum `Σ_δ u(x+δ) h^d` or the max.
//!
//! The integral form uses a plain node sum with no endpoint weighting, so the
//! discrete kernel stays exactly symmetric in `x` and `y`.

use serde::{Deserialize, Serialize};

use crate::domain::{ball_offsets, Domain, NodeKind, OffsetSet};
use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Integral,
    Sup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    offsets: OffsetSet,
}

impl KernelSpec {
    /// Kernel of radius `radius` on the lattice of `domain`.
    ///
    /// The radius must fit inside the unit collar and span at least two cells.
    pub fn new(kind: KernelKind, radius: f64, domain: &Domain) -> Result<Self> {
        let h = domain.h();
        if !(radius > 0.0 && radius <= 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("kernel radius must lie in (0, 1], got {radius}")));
        }
        if radius / h < 2.0 - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "kernel radius {radius} resolves fewer than two cells at h = {h}"
            )));
        }
        let offsets = ball_offsets(h, radius, domain.dim())?;
        Ok(Self { kind, offsets })
    }

    pub fn unit(kind: KernelKind, domain: &Domain) -> Result<Self> {
        Self::new(kind, 1.0, domain)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.offsets.radius()
    }

    pub fn offsets(&self) -> &OffsetSet {
        &self.offsets
    }
}

/// `H(u)` at interior nodes (zero elsewhere).
pub fn apply_kernel(u: &Field, domain: &Domain, kernel: &KernelSpec) -> Field {
    assert!(
        (kernel.offsets.h() - domain.h()).abs() <= 1e-12 * domain.h() && kernel.offsets.dim() == domain.dim(),
        "kernel built for a different lattice"
    );
    let deltas: Vec<isize> = kernel.offsets.offsets().iter().map(|&o| domain.offset_delta(o)).collect();
    let weight = kernel.offsets.weight();
    let vals = u.as_slice();
    let mut out = Field::zeros(domain);
    for &idx in domain.interior() {
        let at = |d: isize| {
            let j = (idx as isize + d) as usize;
            debug_assert_ne!(domain.kind(j), NodeKind::Outside, "collar does not cover kernel support");
            vals[j]
        };
        out[idx] = match kernel.kind {
            KernelKind::Integral => deltas.iter().map(|&d| at(d)).sum::<f64>() * weight,
            KernelKind::Sup => deltas.iter().map(|&d| at(d)).fold(f64::NEG_INFINITY, f64::max),
        };
    }
    out
}

/// `H(u_j)` for every species.
pub fn apply_kernel_family(family: &[Field], domain: &Domain, kernel: &KernelSpec) -> Vec<Field> {
    family.iter().map(|u| apply_kernel(u, domain, kernel)).collect()
}

/// Interaction coefficients `c_i = (1/ε) Σ_{j≠i} H(u_j)` from precomputed `H(u_j)`.
pub fn coefficients_from_kernels(kernels: &[Field], eps: f64, domain: &Domain) -> Vec<Field> {
    let m = kernels.len();
    (0..m)
        .map(|i| {
            let mut c = Field::zeros(domain);
            for &idx in domain.interior() {
                let s: f64 = (0..m).filter(|&j| j != i).map(|j| kernels[j][idx]).sum();
                c[idx] = s / eps;
            }
            c
        })
        .collect()
}

/// `c_i(x) = (1/ε) Σ_{j≠i} H(u_j)(x)`.
pub fn interaction_coefficient(
    family: &[Field],
    i: usize,
    eps: f64,
    domain: &Domain,
    kernel: &KernelSpec,
) -> Result<Field> {
    check_eps(eps)?;
    if i >= family.len() {
        return Err(Error::InvalidArgument(format!("species {i} out of range")));
    }
    let mut c = Field::zeros(domain);
    for (j, u) in family.iter().enumerate() {
        if j == i {
            continue;
        }
        let hj = apply_kernel(u, domain, kernel);
        for &idx in domain.interior() {
            c[idx] += hj[idx];
        }
    }
    for &idx in domain.interior() {
        c[idx] /= eps;
    }
    Ok(c)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(h: f64) -> Domain {
        Domain::new(&[-2.0], &[2.0], h).unwrap()
    }

    fn constant(domain: &Domain, c: f64) -> Field {
        Field::from_fn(domain, |_| c)
    }

    #[test]
    fn integral_of_one_counts_offsets() {
        let d = line(0.5);
        let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
        let hu = apply_kernel(&constant(&d, 1.0), &d, &k);
        assert!(d.interior().iter().all(|&i| (hu[i] - 2.5).abs() < 1e-14));
    }

    #[test]
    fn sup_of_constant() {
        let d = line(0.25);
        let k = KernelSpec::unit(KernelKind::Sup, &d).unwrap();
        let hu = apply_kernel(&constant(&d, 3.5), &d, &k);
        assert!(d.interior().iter().all(|&i| hu[i] == 3.5));
    }

    #[test]
    fn far_support_gives_zero() {
        let d = line(0.125);
        let u = Field::from_fn(&d, |x| if x[0] >= 1.5 { 1.0 } else { 0.0 });
        for kind in [KernelKind::Integral, KernelKind::Sup] {
            let k = KernelSpec::unit(kind, &d).unwrap();
            let hu = apply_kernel(&u, &d, &k);
            for &i in d.interior() {
                if d.coords(i)[0] < 0.5 - 1e-9 {
                    assert_eq!(hu[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn coefficients() {
        let d = line(0.5);
        let k = KernelSpec::unit(KernelKind::Integral, &d).unwrap();
        let single = vec![constant(&d, 1.0)];
        let c = interaction_coefficient(&single, 0, 0.1, &d, &k).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));

        let pair = vec![constant(&d, 1.0), Field::zeros(&d)];
        let c = interaction_coefficient(&pair, 0, 0.1, &d, &k).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));

        let three = vec![Field::zeros(&d), constant(&d, 1.0), constant(&d, 1.0)];
        let c = interaction_coefficient(&three, 0, 0.1, &d, &k).unwrap();
        assert!(d.interior().iter().all(|&i| (c[i] - 50.0).abs() < 1e-10));

        assert!(interaction_coefficient(&three, 0, 0.0, &d, &k).is_err());
        assert!(interaction_coefficient(&three, 0, -1.0, &d, &k).is_err());
    }

    #[test]
    fn radius_limits() {
        let d = line(0.125);
        assert!(KernelSpec::new(KernelKind::Integral, 1.5, &d).is_err());
        assert!(KernelSpec::new(KernelKind::Integral, 0.2, &d).is_err());
        assert!(KernelSpec::new(KernelKind::Integral, 0.25, &d).is_ok());
    }
}
