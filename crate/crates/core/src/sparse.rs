//! Compressed-row storage over the vertex stencil graph.

use std::sync::Arc;

use crate::error::{Result, SqgError};
use crate::mesh::TorusMesh;
use crate::par;

/// Shared sparsity pattern: row `i` holds the sorted stencil I(i).
#[derive(Debug, PartialEq)]
pub struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Position of entry (j, i) for each stored entry (i, j).
    transpose_pos: Vec<usize>,
    /// Position of the diagonal entry in each row.
    diag_pos: Vec<usize>,
    /// Row of each stored entry.
    row_idx: Vec<usize>,
}

impl Pattern {
    pub fn from_mesh(mesh: &TorusMesh) -> Self {
        let n = mesh.num_vertices();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(7 * n);
        let mut diag_pos = Vec::with_capacity(n);
        row_ptr.push(0);
        for i in 0..n {
            for &j in mesh.stencil_unchecked(i) {
                if j == i {
                    diag_pos.push(col_idx.len());
                }
                col_idx.push(j);
            }
            row_ptr.push(col_idx.len());
        }
        let mut transpose_pos = vec![0; col_idx.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                let row_j = &col_idx[row_ptr[j]..row_ptr[j + 1]];
                let off = row_j.binary_search(&i).expect("stencil graph is symmetric");
                transpose_pos[k] = row_ptr[j] + off;
            }
        }
        let row_idx = (0..n)
            .flat_map(|i| std::iter::repeat_n(i, row_ptr[i + 1] - row_ptr[i]))
            .collect();
        Self {
            row_ptr,
            col_idx,
            transpose_pos,
            diag_pos,
            row_idx,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn cols(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_range(i)]
    }

    #[inline]
    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k]
    }

    #[inline]
    pub fn row(&self, k: usize) -> usize {
        self.row_idx[k]
    }

    /// Per-entry values `f(i, j, k)` for every stored entry `k = (i, j)`.
    pub fn entry_values<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(usize, usize, usize) -> f64 + Sync + Send,
    {
        let mut out = vec![0.0; self.nnz()];
        par::fill(&mut out, |k| f(self.row_idx[k], self.col_idx[k], k));
        out
    }

    #[inline]
    pub fn transpose_pos(&self, k: usize) -> usize {
        self.transpose_pos[k]
    }

    #[inline]
    pub fn diag_pos(&self, i: usize) -> usize {
        self.diag_pos[i]
    }

    /// Position of entry (i, j), if stored.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|off| r.start + off)
    }
}

/// Sparse matrix on the stencil pattern.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_values(pattern: Arc<Pattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(SqgError::DimensionMismatch {
                expected: pattern.nnz(),
                got: values.len(),
            });
        }
        Ok(Self { pattern, values })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.pattern.num_rows()
    }

    /// Entry (i, j); zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.values[self.pattern.diag_pos(i)])
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.values[self.pattern.row_range(i)].iter().sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let values = (0..self.values.len())
            .map(|k| self.values[self.pattern.transpose_pos(k)])
            .collect();
        Self {
            pattern: Arc::clone(&self.pattern),
            values,
        }
    }

    /// `alpha * self + beta * other` on the shared pattern.
    pub fn axpby(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        debug_assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self {
            pattern: Arc::clone(&self.pattern),
            values,
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        for len in [x.len(), y.len()] {
            if len != n {
                return Err(SqgError::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        par::fill(y, |i| self.row_dot(i, x));
        Ok(())
    }

    #[inline]
    pub(crate) fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.pattern.row_range(i) {
            acc += self.values[k] * x[self.pattern.col(k)];
        }
        acc
    }

    /// Symmetric quadratic form `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.apply(y)?;
        Ok(par::dot(x, &ay))
    }
}
