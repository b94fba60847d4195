//! Jacobi-preconditioned conjugate gradients for the symmetric systems of
//! the scheme: shifted Laplacians, Poisson on the torus, consistent mass.

use crate::error::{Result, SqgError};
use crate::par;
use crate::sparse::SparseOperator;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Outcome of one iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖Ax − b‖₂ / ‖b‖₂`.
    pub final_residual: f64,
    pub converged: bool,
}

/// A symmetric linear operator with an accessible diagonal.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        par::fill(y, |i| self.row_dot(i, x));
    }

    fn diagonal(&self) -> Vec<f64> {
        SparseOperator::diagonal(self)
    }
}

/// Mass term of a shifted operator.
#[derive(Clone, Copy, Debug)]
pub enum MassRef<'a> {
    Consistent(&'a SparseOperator),
    Lumped(&'a [f64]),
}

/// `alpha · Mass + beta · Stiffness`, applied matrix-free.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedOperator<'a> {
    pub mass: MassRef<'a>,
    pub alpha: f64,
    pub stiffness: &'a SparseOperator,
    pub beta: f64,
}

impl LinearOperator for ShiftedOperator<'_> {
    fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (alpha, beta, k) = (self.alpha, self.beta, self.stiffness);
        match self.mass {
            MassRef::Consistent(m) => {
                par::fill(y, |i| alpha * m.row_dot(i, x) + beta * k.row_dot(i, x))
            }
            MassRef::Lumped(m) => par::fill(y, |i| alpha * m[i] * x[i] + beta * k.row_dot(i, x)),
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let kd = self.stiffness.diagonal();
        let md = match self.mass {
            MassRef::Consistent(m) => m.diagonal(),
            MassRef::Lumped(m) => m.to_vec(),
        };
        md.iter()
            .zip(&kd)
            .map(|(m, k)| self.alpha * m + self.beta * k)
            .collect()
    }
}

/// Preconditioned CG from a zero initial guess.
pub fn pcg<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(SqgError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SqgError::NonFinite("right-hand side"));
    }
    let diag = a.diagonal();
    if diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(SqgError::NonFinite("operator diagonal"));
    }

    let mut x = vec![0.0; n];
    let b_norm = par::dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = par::dot(&r, &z);
    let mut residual = 1.0;

    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    final_residual: residual,
                    converged: false,
                },
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = par::dot(&r, &r).sqrt() / b_norm;
        if residual <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    final_residual: residual,
                    converged: true,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Ok((
        x,
        SolveReport {
            iterations: max_iter,
            final_residual: residual,
            converged: false,
        },
    ))
}

/// Solves `A x = b` for a symmetric positive definite sparse `A`.
pub fn solve_spd(
    a: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if a.values().iter().any(|v| !v.is_finite()) {
        return Err(SqgError::NonFinite("operator entries"));
    }
    pcg(a, b, tol, max_iter)
}

/// Solves the semi-definite torus problem `A x = b` (kernel = constants).
///
/// `b` must sum to zero; the result is shifted to zero lumped mean.
pub fn solve_spd_zero_mean<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    lumped: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let total: f64 = b.iter().sum();
    let scale: f64 = b
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    if total.abs() > 1e-10 * scale {
        return Err(SqgError::NotZeroMean { mean: total });
    }
    let (mut x, report) = pcg(a, b, tol, max_iter)?;
    let mean = lumped.iter().zip(&x).map(|(m, v)| m * v).sum::<f64>() / lumped.iter().sum::<f64>();
    x.iter_mut().for_each(|v| *v -= mean);
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FemOperators;
    use crate::mesh::TorusMesh;
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn ops(n: usize) -> FemOperators {
        FemOperators::assemble(Arc::new(TorusMesh::build_uniform(n).unwrap()))
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

    #[test]
    fn diagonal_system_in_one_iteration() {
        let o = ops(8);
        let mut diag = SparseOperator::zeros(Arc::clone(&o.pattern));
        for i in 0..o.num_vertices() {
            let k = o.pattern.diag_pos(i);
            diag.values_mut()[k] = o.lumped[i];
        }
        let b: Vec<f64> = (0..o.num_vertices()).map(|i| (i as f64).sin()).collect();
        let (x, rep) = solve_spd(&diag, &b, 1e-12, 80).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        for i in 0..b.len() {
            assert!((x[i] - b[i] / o.lumped[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_system_matches_dense_factorization() {
        let o = ops(16);
        let a = o.mass.axpby(1.0, &o.stiffness, 1.0);
        let f: Vec<f64> = o
            .mesh
            .vertices()
            .iter()
            .map(|p| p[1].sin() * p[0].cos())
            .collect();
        let b = o.mass.apply(&f).unwrap();
        let (x, rep) = solve_spd(&a, &b, 1e-12, 160).unwrap();
        assert!(rep.converged);
        let exact = dense(&a).lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..x.len() {
            assert!((x[i] - exact[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_recovers_eigenfunction() {
        let o = ops(32);
        let f: Vec<f64> = o.mesh.vertices().iter().map(|p| p[0].sin()).collect();
        let b = o.mass.apply(&f).unwrap();
        let (x, rep) = solve_spd_zero_mean(&o.stiffness, &b, &o.lumped, 1e-10, 320).unwrap();
        assert!(rep.converged);
        let h = o.mesh.h();
        let err = x
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < h * h, "err {err}");
        assert!(o.lumped_mean(&x).abs() < 1e-14);
    }

    #[test]
    fn shifted_operator_matches_assembled_sum() {
        let o = ops(8);
        let op = ShiftedOperator {
            mass: MassRef::Consistent(&o.mass),
            alpha: 0.7,
            stiffness: &o.stiffness,
            beta: 1.3,
        };
        let a = o.mass.axpby(0.7, &o.stiffness, 1.3);
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut y = vec![0.0; 64];
        op.apply_into(&x, &mut y);
        let y2 = a.apply(&x).unwrap();
        for i in 0..64 {
            assert!((y[i] - y2[i]).abs() < 1e-13);
        }
        assert_eq!(op.diagonal().len(), 64);
    }

    #[test]
    fn rejects_non_finite() {
        let o = ops(4);
        let mut b = vec![0.0; 16];
        b[3] = f64::NAN;
        assert!(matches!(
            solve_spd(&o.mass, &b, 1e-10, 40),
            Err(SqgError::NonFinite(_))
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let o = ops(16);
        let a = o.mass.axpby(1e-3, &o.stiffness, 1.0);
        let b: Vec<f64> = (0..256).map(|i| (i as f64 * 0.1).sin()).collect();
        let (_, rep) = solve_spd(&a, &b, 1e-14, 2).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
    }

    #[test]
    fn solves_are_deterministic() {
        let o = ops(12);
        let a = o.mass.axpby(2.0, &o.stiffness, 1.0);
        let b: Vec<f64> = (0..144).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x1, _) = solve_spd(&a, &b, 1e-12, 200).unwrap();
        let (x2, _) = solve_spd(&a, &b, 1e-12, 200).unwrap();
        assert_eq!(x1, x2);
    }
}
