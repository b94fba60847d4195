//! Discrete Fourier diagonalisation of translation-invariant operators.
//!
//! On the uniform periodic mesh every assembled symmetric operator is a
//! 2D circulant, so `A x = b` reduces to a pointwise division by the real
//! symbol of `A` in Fourier space. Spectra are stored transposed: entry
//! `k1 * n + k2` holds wavenumber `(k1, k2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SqgError};
use crate::mesh::TorusMesh;
use crate::par;
use crate::sparse::SparseOperator;

/// Planned 2D FFT on an `n × n` periodic grid.
#[derive(Clone)]
pub struct TorusFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusFft").field("n", &self.n).finish()
    }
}

impl TorusFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let fft = Arc::clone(fft);
        // one row per task keeps the work deterministic
        par::for_each_chunk(data, n, move |_, row| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(row, &mut scratch);
        });
    }

    fn transpose(&self, data: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::default(); n * n];
        par::for_each_chunk(&mut out, n, |r, row| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = data[c * n + r];
            }
        });
        out
    }

    /// Forward transform of a real nodal field (row-major `i2 * n + i1`).
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.rows(&mut data, &self.forward);
        let mut t = self.transpose(&data);
        self.rows(&mut t, &self.forward);
        t
    }

    /// Inverse transform back to a real nodal field, normalised.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.rows(&mut data, &self.inverse);
        let mut t = self.transpose(&data);
        self.rows(&mut t, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        t.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a real Fourier multiplier (transposed layout) to a field.
    pub fn apply_multiplier(&self, field: &[f64], multiplier: &[f64]) -> Vec<f64> {
        let mut s = self.forward(field);
        s.iter_mut().zip(multiplier).for_each(|(c, m)| *c *= *m);
        self.inverse(&s)
    }
}

/// Real symbol of a symmetric translation-invariant operator, in the
/// transposed spectral layout.
pub fn symbol(mesh: &TorusMesh, op: &SparseOperator) -> Result<Vec<f64>> {
    let n = mesh.n_side();
    let p = op.pattern();
    let offset = |i: usize, j: usize| {
        let (a1, a2) = mesh.grid_index(i);
        let (b1, b2) = mesh.grid_index(j);
        let wrap = |d: isize| {
            let d = d.rem_euclid(n as isize);
            if d > n as isize / 2 {
                d - n as isize
            } else {
                d
            }
        };
        (
            wrap(b1 as isize - a1 as isize),
            wrap(b2 as isize - a2 as isize),
        )
    };

    let weights: Vec<((isize, isize), f64)> = p
        .row_range(0)
        .map(|k| (offset(0, p.col(k)), op.values()[k]))
        .collect();

    for i in 0..mesh.num_vertices() {
        for k in p.row_range(i) {
            let d = offset(i, p.col(k));
            let w = weights
                .iter()
                .find(|(e, _)| *e == d)
                .map(|(_, w)| *w)
                .ok_or(SqgError::NotCirculant)?;
            if (w - op.values()[k]).abs() > 1e-12 * w.abs().max(1e-300) + 1e-300 {
                return Err(SqgError::NotCirculant);
            }
        }
    }
    for &((d1, d2), w) in &weights {
        let mirror = weights.iter().find(|(e, _)| *e == (-d1, -d2));
        if !matches!(mirror, Some((_, m)) if (m - w).abs() <= 1e-12 * w.abs()) {
            return Err(SqgError::NotCirculant);
        }
    }

    let mut sym = vec![0.0; n * n];
    for k1 in 0..n {
        for k2 in 0..n {
            sym[k1 * n + k2] = weights
                .iter()
                .map(|&((d1, d2), w)| {
                    w * (2.0 * PI * (k1 as f64 * d1 as f64 + k2 as f64 * d2 as f64) / n as f64)
                        .cos()
                })
                .sum();
        }
    }
    Ok(sym)
}

/// FFT solver for the shifted systems on the uniform mesh.
#[derive(Clone, Debug)]
pub struct SpectralSolver {
    pub fft: TorusFft,
    pub mass: Vec<f64>,
    pub lumped: Vec<f64>,
    pub stiffness: Vec<f64>,
}

impl SpectralSolver {
    pub fn new(
        mesh: &TorusMesh,
        mass: &SparseOperator,
        lumped: &[f64],
        stiffness: &SparseOperator,
    ) -> Result<Self> {
        let m0 = lumped[0];
        if lumped.iter().any(|m| (m - m0).abs() > 1e-12 * m0) {
            return Err(SqgError::NotCirculant);
        }
        let n = mesh.n_side();
        Ok(Self {
            fft: TorusFft::new(n),
            mass: symbol(mesh, mass)?,
            lumped: vec![m0; n * n],
            stiffness: symbol(mesh, stiffness)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FemOperators;

    #[test]
    fn round_trip() {
        let fft = TorusFft::new(12);
        let f: Vec<f64> = (0..144).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let back = fft.inverse(&fft.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symbol_matches_matvec() {
        let o = FemOperators::assemble(Arc::new(TorusMesh::build_uniform(10).unwrap()));
        for op in [&o.mass, &o.stiffness] {
            let sym = symbol(&o.mesh, op).unwrap();
            let fft = TorusFft::new(10);
            let f: Vec<f64> = (0..100).map(|i| (i as f64 * 0.71).sin()).collect();
            let via_fft = fft.apply_multiplier(&f, &sym);
            let direct = op.apply(&f).unwrap();
            for (a, b) in via_fft.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn skew_operators_have_no_real_symbol() {
        let o = FemOperators::assemble(Arc::new(TorusMesh::build_uniform(6).unwrap()));
        assert!(matches!(
            symbol(&o.mesh, &o.c1),
            Err(SqgError::NotCirculant)
        ));
    }
}
