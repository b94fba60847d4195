//! Dense spectral ground truth for small meshes.
//!
//! Solves the generalised eigenproblem `K φ = λ M φ` densely and applies
//! `Σ λ^s (φᵀ M f) φ` over the nonzero eigenpairs. Used to validate the
//! sinc-quadrature operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::assembly::FemOperators;
use crate::error::{Result, SqgError};
use crate::sparse::SparseOperator;
use crate::system::MassKind;

pub const ORACLE_MAX_SIDE: usize = 32;

pub struct SpectralOracle {
    /// `M^{1/2}` and `M^{-1/2}`.
    mass_sqrt: DMatrix<f64>,
    mass_inv_sqrt: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

fn dense(op: &SparseOperator) -> DMatrix<f64> {
    let n = op.dim();
    let p = op.pattern();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in p.row_range(i) {
            d[(i, p.col(k))] += op.values()[k];
        }
    }
    d
}

impl SpectralOracle {
    pub fn new(ops: &FemOperators, mass: MassKind) -> Result<Self> {
        let n_side = ops.mesh.n_side();
        if n_side > ORACLE_MAX_SIDE {
            return Err(SqgError::OracleTooLarge(n_side));
        }
        let m = match mass {
            MassKind::Consistent => dense(&ops.mass),
            MassKind::Lumped => DMatrix::from_diagonal(&DVector::from_column_slice(&ops.lumped)),
        };
        let k = dense(&ops.stiffness);
        let me = SymmetricEigen::new(m);
        let sqrt_d = me.eigenvalues.map(f64::sqrt);
        let inv_sqrt_d = me.eigenvalues.map(|v| 1.0 / v.sqrt());
        let q = &me.eigenvectors;
        let mass_sqrt = q * DMatrix::from_diagonal(&sqrt_d) * q.transpose();
        let mass_inv_sqrt = q * DMatrix::from_diagonal(&inv_sqrt_d) * q.transpose();
        let c = &mass_inv_sqrt * k * &mass_inv_sqrt;
        let c = (&c + c.transpose()) * 0.5;
        let ce = SymmetricEigen::new(c);
        Ok(Self {
            mass_sqrt,
            mass_inv_sqrt,
            eigenvalues: ce.eigenvalues,
            eigenvectors: ce.eigenvectors,
        })
    }

    /// Generalised eigenvalues, unsorted.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    /// `Σ_{λ_i > 0} λ_i^{power} (φ_iᵀ M f) φ_i`, `power ∈ [−1, 1]`.
    pub fn apply(&self, f: &[f64], power: f64) -> Result<Vec<f64>> {
        if !(-1.0..=1.0).contains(&power) {
            return Err(SqgError::InvalidParameter {
                name: "power".into(),
                reason: format!("must lie in [-1, 1], got {power}"),
            });
        }
        if f.len() != self.eigenvalues.len() {
            return Err(SqgError::DimensionMismatch {
                expected: self.eigenvalues.len(),
                got: f.len(),
            });
        }
        let lmax = self.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let fv = DVector::from_column_slice(f);
        let mut coeff = self.eigenvectors.transpose() * (&self.mass_sqrt * fv);
        for (c, &l) in coeff.iter_mut().zip(self.eigenvalues.iter()) {
            *c = if l > 1e-10 * lmax {
                *c * l.powf(power)
            } else {
                0.0
            };
        }
        let out = &self.mass_inv_sqrt * (&self.eigenvectors * coeff);
        Ok(out.as_slice().to_vec())
    }
}

/// One-shot oracle application with the consistent mass.
pub fn spectral_oracle_frac(ops: &FemOperators, f: &[f64], power: f64) -> Result<Vec<f64>> {
    SpectralOracle::new(ops, MassKind::Consistent)?.apply(f, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TorusMesh;
    use std::sync::Arc;

    fn ops(n: usize) -> FemOperators {
        FemOperators::assemble(Arc::new(TorusMesh::build_uniform(n).unwrap()))
    }

    fn field(o: &FemOperators) -> Vec<f64> {
        let mut f: Vec<f64> = o
            .mesh
            .vertices()
            .iter()
            .map(|p| {
                (p[0] + 2.0 * p[1]).sin()
                    + (3.0 * p[0]).cos() * p[1].sin()
                    + 0.3 * (p[0] * p[1]).sin()
            })
            .collect();
        o.remove_mean(&mut f);
        f
    }

    #[test]
    fn power_zero_is_identity_on_zero_mean() {
        let o = ops(8);
        let f = field(&o);
        let g = spectral_oracle_frac(&o, &f, 0.0).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn power_one_is_mass_inverse_stiffness() {
        let o = ops(8);
        let f = field(&o);
        let g = spectral_oracle_frac(&o, &f, 1.0).unwrap();
        let kf = o.stiffness.apply(&f).unwrap();
        let m = dense(&o.mass);
        let expect = m.lu().solve(&DVector::from_vec(kf)).unwrap();
        for (a, b) in g.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn half_powers_compose_to_identity() {
        let o = ops(8);
        let orc = SpectralOracle::new(&o, MassKind::Consistent).unwrap();
        let f = field(&o);
        let g = orc.apply(&orc.apply(&f, 0.5).unwrap(), -0.5).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn refuses_large_meshes() {
        let o = ops(33);
        assert!(matches!(
            SpectralOracle::new(&o, MassKind::Consistent),
            Err(SqgError::OracleTooLarge(33))
        ));
    }
}
