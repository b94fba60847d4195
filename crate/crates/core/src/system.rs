//! Assembled operators bundled with the linear-solver backend.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::assembly::FemOperators;
use crate::error::{Result, SqgError};
use crate::fourier::SpectralSolver;
use crate::linsolve::{self, MassRef, ShiftedOperator, SolveReport};
use crate::mesh::TorusMesh;

/// How the symmetric systems of the scheme are solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverKind {
    /// Exact diagonalisation by FFT (uniform mesh only).
    Spectral,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iter: usize },
}

impl SolverKind {
    /// CG with the default tolerance and `10 · n_side` iterations.
    pub fn default_cg(n_side: usize) -> Self {
        SolverKind::Cg {
            tol: linsolve::DEFAULT_TOL,
            max_iter: 10 * n_side,
        }
    }
}

/// Which mass matrix enters a shifted operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MassKind {
    Consistent,
    Lumped,
}

pub(crate) type MultiplierKey = (u8, u64, u64, usize);

pub struct FemSystem {
    pub ops: FemOperators,
    kind: SolverKind,
    spectral: Option<SpectralSolver>,
    pub(crate) multipliers: Mutex<HashMap<MultiplierKey, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for FemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemSystem")
            .field("n_side", &self.mesh().n_side())
            .field("kind", &self.kind)
            .finish()
    }
}

impl FemSystem {
    pub fn new(mesh: TorusMesh, kind: SolverKind) -> Result<Self> {
        let ops = FemOperators::assemble(Arc::new(mesh));
        let spectral = match kind {
            SolverKind::Spectral => Some(SpectralSolver::new(
                &ops.mesh,
                &ops.mass,
                &ops.lumped,
                &ops.stiffness,
            )?),
            SolverKind::Cg { .. } => None,
        };
        Ok(Self {
            ops,
            kind,
            spectral,
            multipliers: Mutex::new(HashMap::new()),
        })
    }

    pub fn uniform(n_side: usize, kind: SolverKind) -> Result<Self> {
        Self::new(TorusMesh::build_uniform(n_side)?, kind)
    }

    pub fn mesh(&self) -> &TorusMesh {
        &self.ops.mesh
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.ops.num_vertices()
    }

    pub(crate) fn spectral(&self) -> Option<&SpectralSolver> {
        self.spectral.as_ref()
    }

    pub(crate) fn multiplier<F>(&self, key: MultiplierKey, build: F) -> Arc<Vec<f64>>
    where
        F: FnOnce(&SpectralSolver) -> Vec<f64>,
    {
        let mut cache = self.multipliers.lock().expect("multiplier cache poisoned");
        if let Some(m) = cache.get(&key) {
            return Arc::clone(m);
        }
        let m = Arc::new(build(self.spectral.as_ref().expect("spectral backend")));
        cache.insert(key, Arc::clone(&m));
        m
    }

    /// Solves `(alpha · Mass + beta · Stiffness) x = rhs`, `alpha > 0`.
    pub fn solve_shifted(
        &self,
        mass: MassKind,
        alpha: f64,
        beta: f64,
        rhs: &[f64],
    ) -> Result<(Vec<f64>, SolveReport)> {
        if rhs.len() != self.n() {
            return Err(SqgError::DimensionMismatch {
                expected: self.n(),
                got: rhs.len(),
            });
        }
        match (&self.spectral, self.kind) {
            (Some(sp), _) => {
                let ms = match mass {
                    MassKind::Consistent => &sp.mass,
                    MassKind::Lumped => &sp.lumped,
                };
                let mult: Vec<f64> = ms
                    .iter()
                    .zip(&sp.stiffness)
                    .map(|(m, k)| 1.0 / (alpha * m + beta * k))
                    .collect();
                Ok((sp.fft.apply_multiplier(rhs, &mult), exact_report()))
            }
            (None, SolverKind::Cg { tol, max_iter }) => {
                let op = ShiftedOperator {
                    mass: match mass {
                        MassKind::Consistent => MassRef::Consistent(&self.ops.mass),
                        MassKind::Lumped => MassRef::Lumped(&self.ops.lumped),
                    },
                    alpha,
                    stiffness: &self.ops.stiffness,
                    beta,
                };
                linsolve::pcg(&op, rhs, tol, max_iter)
            }
            (None, SolverKind::Spectral) => unreachable!("spectral backend is built eagerly"),
        }
    }

    /// Consistent-mass solve `M x = rhs`; errors if the iteration stalls.
    pub fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (x, rep) = self.solve_shifted(MassKind::Consistent, 1.0, 0.0, rhs)?;
        if !rep.converged {
            return Err(SqgError::SolveFailed {
                residual: rep.final_residual,
                iterations: rep.iterations,
            });
        }
        Ok(x)
    }

    /// Zero-mean solution of `Stiffness · x = rhs` (rhs must sum to zero).
    pub fn solve_poisson(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match (&self.spectral, self.kind) {
            (Some(sp), _) => {
                let total: f64 = rhs.iter().sum();
                let scale: f64 = rhs
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE);
                if total.abs() > 1e-10 * scale {
                    return Err(SqgError::NotZeroMean { mean: total });
                }
                let mult: Vec<f64> = sp
                    .stiffness
                    .iter()
                    .enumerate()
                    .map(|(i, k)| if i == 0 { 0.0 } else { 1.0 / k })
                    .collect();
                Ok(sp.fft.apply_multiplier(rhs, &mult))
            }
            (None, SolverKind::Cg { tol, max_iter }) => {
                let (x, rep) = linsolve::solve_spd_zero_mean(
                    &self.ops.stiffness,
                    rhs,
                    &self.ops.lumped,
                    tol,
                    max_iter,
                )?;
                if !rep.converged {
                    return Err(SqgError::SolveFailed {
                        residual: rep.final_residual,
                        iterations: rep.iterations,
                    });
                }
                Ok(x)
            }
            (None, SolverKind::Spectral) => unreachable!("spectral backend is built eagerly"),
        }
    }
}

fn exact_report() -> SolveReport {
    SolveReport {
        iterations: 0,
        final_residual: 0.0,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_and_cg_backends_agree() {
        let sp = FemSystem::uniform(12, SolverKind::Spectral).unwrap();
        let cg = FemSystem::uniform(
            12,
            SolverKind::Cg {
                tol: 1e-13,
                max_iter: 500,
            },
        )
        .unwrap();
        let f: Vec<f64> = (0..144).map(|i| (i as f64 * 0.41).cos()).collect();
        for (mass, a, b) in [
            (MassKind::Consistent, 1.0, 0.5),
            (MassKind::Lumped, 1.0, 3.0),
            (MassKind::Consistent, 1.0, 0.0),
        ] {
            let (x1, _) = sp.solve_shifted(mass, a, b, &f).unwrap();
            let (x2, r) = cg.solve_shifted(mass, a, b, &f).unwrap();
            assert!(r.converged);
            for (u, v) in x1.iter().zip(&x2) {
                assert!((u - v).abs() < 1e-10);
            }
        }
        let mut g = f.clone();
        let mean = g.iter().sum::<f64>() / 144.0;
        g.iter_mut().for_each(|v| *v -= mean);
        let p1 = sp.solve_poisson(&g).unwrap();
        let p2 = cg.solve_poisson(&g).unwrap();
        for (u, v) in p1.iter().zip(&p2) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let sp = FemSystem::uniform(8, SolverKind::Spectral).unwrap();
        assert!(matches!(
            sp.solve_poisson(&vec![1.0; 64]),
            Err(SqgError::NotZeroMean { .. })
        ));
    }
}
