//! Graph viscosities and the CFL time step.

use crate::assembly::{FemOperators, VectorField2};
use crate::par;
use crate::sparse::SparseOperator;

/// Symmetric stencil matrix with nonnegative off-diagonal entries and zero
/// row sums.
#[derive(Clone, Debug)]
pub struct GraphViscosity {
    op: SparseOperator,
}

impl GraphViscosity {
    /// Builds the matrix from off-diagonal values; the diagonal is
    /// overwritten with the negative off-diagonal row sum.
    pub fn from_offdiagonal(mut op: SparseOperator) -> Self {
        let p = std::sync::Arc::clone(op.pattern());
        let values = op.values_mut();
        for i in 0..p.num_rows() {
            let d = p.diag_pos(i);
            values[d] = 0.0;
            let off: f64 = p.row_range(i).map(|k| values[k]).sum();
            values[d] = -off;
        }
        Self { op }
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn values(&self) -> &[f64] {
        self.op.values()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.op.get(i, j)
    }

    /// `Σ_{j≠i} d_ij` for every row.
    pub fn offdiagonal_row_sums(&self) -> Vec<f64> {
        self.op.diagonal().iter().map(|d| -d).collect()
    }

    /// `Σ_j d_ij θ_j`.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.op.pattern();
        let v = self.op.values();
        let mut out = vec![0.0; p.num_rows()];
        par::fill(&mut out, |i| {
            p.row_range(i)
                .filter(|&k| k != p.diag_pos(i))
                .map(|k| v[k] * (theta[p.col(k)] - theta[i]))
                .sum()
        });
        out
    }

    /// `max_i (Δt / m_i) Σ_{j≠i} d_ij` for the given step.
    pub fn cfl_ratio(&self, lumped: &[f64], dt: f64) -> f64 {
        self.offdiagonal_row_sums()
            .iter()
            .zip(lumped)
            .map(|(s, m)| dt * s / m)
            .fold(0.0, f64::max)
    }
}

/// `max(|u_i·n|, |u_j·n|)` for a unit direction `n`.
fn max_speed(u: &VectorField2, i: usize, j: usize, n: [f64; 2]) -> f64 {
    let a = u.u1[i] * n[0] + u.u2[i] * n[1];
    let b = u.u1[j] * n[0] + u.u2[j] * n[1];
    a.abs().max(b.abs())
}

/// Low-order graph viscosity
/// `d_ij = max(λ_max(n_ij)‖c_ij‖, λ_max(n_ji)‖c_ji‖)`, `i ≠ j`.
///
/// The wave speed of linear transport depends on the velocity only.
pub fn low_order_viscosity(ops: &FemOperators, u: &VectorField2) -> GraphViscosity {
    let p = &ops.pattern;
    let (c1, c2, cn) = (ops.c1.values(), ops.c2.values(), &ops.c_norm);
    let values = p.entry_values(|i, j, k| {
        if j == i || cn[k] == 0.0 {
            return 0.0;
        }
        let kt = p.transpose_pos(k);
        let nij = [c1[k] / cn[k], c2[k] / cn[k]];
        let nji = [c1[kt] / cn[kt], c2[kt] / cn[kt]];
        let a = max_speed(u, i, j, nij) * cn[k];
        let b = max_speed(u, j, i, nji) * cn[kt];
        a.max(b)
    });
    let op = SparseOperator::from_values(std::sync::Arc::clone(p), values)
        .expect("values match the pattern");
    GraphViscosity::from_offdiagonal(op)
}

/// Result of the CFL time-step selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtChoice {
    pub dt: f64,
    /// The viscosity vanished and the cap was returned.
    pub capped_by_zero_viscosity: bool,
}

/// `Δt = cfl · min_i m_i / Σ_{j≠i} d_ij`, capped at `dt_max`.
pub fn select_dt(dl: &GraphViscosity, lumped: &[f64], cfl: f64, dt_max: f64) -> DtChoice {
    let mut best = f64::INFINITY;
    for (s, m) in dl.offdiagonal_row_sums().iter().zip(lumped) {
        if *s > 0.0 {
            best = best.min(m / s);
        }
    }
    if best.is_infinite() {
        log::warn!("graph viscosity vanishes; using the time-step cap {dt_max}");
        return DtChoice {
            dt: dt_max,
            capped_by_zero_viscosity: true,
        };
    }
    DtChoice {
        dt: (cfl * best).min(dt_max),
        capped_by_zero_viscosity: false,
    }
}
