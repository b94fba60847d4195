//! P1 finite-element operators on the torus mesh.
//!
//! All element integrals use the closed-form P1 formulas, so they are exact.
//! Triangles are visited in index order, which fixes the accumulation order
//! of every entry.

use std::sync::Arc;

use crate::mesh::TorusMesh;
use crate::sparse::{Pattern, SparseOperator};

/// Nodal coefficients of a P1 function, one per vertex.
pub type ScalarField = Vec<f64>;

/// Two nodal coefficient arrays for a P1 vector field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorField2 {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl VectorField2 {
    pub fn zeros(n: usize) -> Self {
        Self {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, value: [f64; 2]) -> Self {
        Self {
            u1: vec![value[0]; n],
            u2: vec![value[1]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }
}

/// Consistent mass matrix `m_ij = ∫ φ_j φ_i` and lumped masses `m_i`.
pub fn assemble_mass(mesh: &TorusMesh, pattern: &Arc<Pattern>) -> (SparseOperator, Vec<f64>) {
    let mut mass = SparseOperator::zeros(Arc::clone(pattern));
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangles()[t];
        let area = mesh.signed_area(t);
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { area / 6.0 } else { area / 12.0 };
                add(&mut mass, pattern, tri[a], tri[b], w);
            }
        }
    }
    let lumped = mass.row_sums();
    (mass, lumped)
}

/// Stiffness matrix `∫ ∇φ_j · ∇φ_i`.
pub fn assemble_stiffness(mesh: &TorusMesh, pattern: &Arc<Pattern>) -> SparseOperator {
    let mut k = SparseOperator::zeros(Arc::clone(pattern));
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangles()[t];
        let area = mesh.signed_area(t);
        let g = mesh.hat_gradients(t);
        for a in 0..3 {
            for b in 0..3 {
                let w = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                add(&mut k, pattern, tri[a], tri[b], w);
            }
        }
    }
    k
}

/// Components of the transport vectors `c_ij = ∫ ∇φ_j φ_i`.
pub fn assemble_cij(mesh: &TorusMesh, pattern: &Arc<Pattern>) -> (SparseOperator, SparseOperator) {
    let mut c1 = SparseOperator::zeros(Arc::clone(pattern));
    let mut c2 = SparseOperator::zeros(Arc::clone(pattern));
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangles()[t];
        let area = mesh.signed_area(t);
        let g = mesh.hat_gradients(t);
        for a in 0..3 {
            for b in 0..3 {
                // ∫_K φ_a = |K| / 3
                add(&mut c1, pattern, tri[a], tri[b], g[b][0] * area / 3.0);
                add(&mut c2, pattern, tri[a], tri[b], g[b][1] * area / 3.0);
            }
        }
    }
    (c1, c2)
}

fn add(op: &mut SparseOperator, pattern: &Pattern, i: usize, j: usize, w: f64) {
    let k = pattern
        .find(i, j)
        .expect("element pair lies in the stencil");
    op.values_mut()[k] += w;
}

/// Assembled operators for one mesh. Immutable once built.
#[derive(Clone, Debug)]
pub struct FemOperators {
    pub mesh: Arc<TorusMesh>,
    pub pattern: Arc<Pattern>,
    pub mass: SparseOperator,
    pub lumped: Vec<f64>,
    pub stiffness: SparseOperator,
    pub c1: SparseOperator,
    pub c2: SparseOperator,
    /// `‖c_ij‖₂` per stored entry.
    pub c_norm: Vec<f64>,
    /// Hat-function gradients per triangle.
    pub hat_grads: Vec<[[f64; 2]; 3]>,
    pub areas: Vec<f64>,
    /// Triangles incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl FemOperators {
    pub fn assemble(mesh: Arc<TorusMesh>) -> Self {
        let pattern = Arc::new(Pattern::from_mesh(&mesh));
        let (mass, lumped) = assemble_mass(&mesh, &pattern);
        let stiffness = assemble_stiffness(&mesh, &pattern);
        let (c1, c2) = assemble_cij(&mesh, &pattern);
        let c_norm = c1
            .values()
            .iter()
            .zip(c2.values())
            .map(|(a, b)| a.hypot(*b))
            .collect();
        let hat_grads = (0..mesh.triangles().len())
            .map(|t| mesh.hat_gradients(t))
            .collect();
        let areas = (0..mesh.triangles().len())
            .map(|t| mesh.signed_area(t))
            .collect();
        let vertex_triangles = mesh.vertex_triangles();
        Self {
            mesh,
            pattern,
            mass,
            lumped,
            stiffness,
            c1,
            c2,
            c_norm,
            hat_grads,
            areas,
            vertex_triangles,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.lumped.len()
    }

    /// `Σ_i m_i θ_i`.
    pub fn lumped_integral(&self, theta: &[f64]) -> f64 {
        self.lumped.iter().zip(theta).map(|(m, t)| m * t).sum()
    }

    /// Lumped mean `Σ m_i θ_i / Σ m_i`.
    pub fn lumped_mean(&self, theta: &[f64]) -> f64 {
        self.lumped_integral(theta) / self.lumped.iter().sum::<f64>()
    }

    /// Subtracts the lumped mean in place.
    pub fn remove_mean(&self, theta: &mut [f64]) {
        let mean = self.lumped_mean(theta);
        theta.iter_mut().for_each(|t| *t -= mean);
    }

    /// Constant gradient of a P1 field on every triangle.
    pub fn element_gradients(&self, f: &[f64]) -> Vec<[f64; 2]> {
        let tris = self.mesh.triangles();
        crate::par::map(tris.len(), |t| {
            let g = &self.hat_grads[t];
            let tri = tris[t];
            let mut out = [0.0; 2];
            for a in 0..3 {
                out[0] += f[tri[a]] * g[a][0];
                out[1] += f[tri[a]] * g[a][1];
            }
            out
        })
    }

    /// Area-weighted average of element gradients over each vertex patch.
    pub fn patch_gradients(&self, f: &[f64]) -> VectorField2 {
        let eg = self.element_gradients(f);
        let n = self.num_vertices();
        let avg = crate::par::map(n, |i| {
            let mut acc = [0.0; 2];
            let mut area = 0.0;
            for &t in &self.vertex_triangles[i] {
                acc[0] += self.areas[t] * eg[t][0];
                acc[1] += self.areas[t] * eg[t][1];
                area += self.areas[t];
            }
            [acc[0] / area, acc[1] / area]
        });
        VectorField2 {
            u1: avg.iter().map(|g| g[0]).collect(),
            u2: avg.iter().map(|g| g[1]).collect(),
        }
    }

    /// `Σ_j u_j · c_ij θ_j` for every row.
    pub fn transport_flux(&self, u: &VectorField2, theta: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        let (c1, c2) = (self.c1.values(), self.c2.values());
        let mut out = vec![0.0; self.num_vertices()];
        crate::par::fill(&mut out, |i| {
            let mut acc = 0.0;
            for k in p.row_range(i) {
                let j = p.col(k);
                acc += (u.u1[j] * c1[k] + u.u2[j] * c2[k]) * theta[j];
            }
            acc
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ops(n: usize) -> FemOperators {
        FemOperators::assemble(Arc::new(TorusMesh::build_uniform(n).unwrap()))
    }

    /// Centroid rule on a 40×40 sub-triangulation; `f` takes barycentrics.
    fn brute_element_integral<F: Fn(f64, f64, f64) -> f64>(area: f64, f: F) -> f64 {
        let m = 40;
        let mut acc = 0.0;
        let mut count = 0.0;
        for a in 0..m {
            for b in 0..(m - a) {
                // upward sub-triangle centroid
                let l1 = (a as f64 + 1.0 / 3.0) / m as f64;
                let l2 = (b as f64 + 1.0 / 3.0) / m as f64;
                acc += f(1.0 - l1 - l2, l1, l2);
                count += 1.0;
                if a + b + 1 < m {
                    let l1 = (a as f64 + 2.0 / 3.0) / m as f64;
                    let l2 = (b as f64 + 2.0 / 3.0) / m as f64;
                    acc += f(1.0 - l1 - l2, l1, l2);
                    count += 1.0;
                }
            }
        }
        acc / count * area
    }

    #[test]
    fn lumped_mass_is_h_squared() {
        let o = ops(8);
        let h = o.mesh.h();
        for &m in &o.lumped {
            assert!((m - h * h).abs() < 1e-14);
        }
        let total: f64 = o.lumped.iter().sum();
        assert!((total - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn mass_diagonal_matches_brute_force() {
        let o = ops(6);
        let h = o.mesh.h();
        let area = h * h / 2.0;
        // Six incident triangles, each contributing ∫ λ_a².
        let per_tri = brute_element_integral(area, |l0, _, _| l0 * l0);
        assert!((6.0 * per_tri - h * h / 2.0).abs() < 1e-3 * h * h);
        for i in 0..o.num_vertices() {
            assert!((o.mass.get(i, i) - h * h / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_times_ones_is_lumped() {
        let o = ops(7);
        let ones = vec![1.0; o.num_vertices()];
        let m1 = o.mass.apply(&ones).unwrap();
        assert_eq!(m1, o.lumped);
    }

    #[test]
    fn stiffness_five_point_stencil() {
        let o = ops(8);
        let mesh = &o.mesh;
        for i in 0..o.num_vertices() {
            let (a, b) = mesh.grid_index(i);
            let (a, b) = (a as isize, b as isize);
            assert!((o.stiffness.get(i, i) - 4.0).abs() < 1e-12);
            for (d1, d2) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let j = mesh.vertex_id(a + d1, b + d2);
                assert!((o.stiffness.get(i, j) + 1.0).abs() < 1e-12);
            }
            for (d1, d2) in [(1, 1), (-1, -1)] {
                let j = mesh.vertex_id(a + d1, b + d2);
                assert!(o.stiffness.get(i, j).abs() < 1e-12);
            }
        }
        assert!(o.stiffness.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn stiffness_energy_of_sine() {
        let o = ops(64);
        let f: Vec<f64> = o.mesh.vertices().iter().map(|p| p[0].sin()).collect();
        let e = o.stiffness.bilinear(&f, &f).unwrap();
        assert!((e - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI);
    }

    #[test]
    fn cij_skew_and_zero_sums() {
        let o = ops(9);
        for c in [&o.c1, &o.c2] {
            let ct = c.transpose();
            for (a, b) in c.values().iter().zip(ct.values()) {
                assert!((a + b).abs() < 1e-14);
            }
            let ones = vec![1.0; o.num_vertices()];
            let col = ct.apply(&ones).unwrap();
            assert!(col.iter().all(|s| s.abs() < 1e-14));
            let row = c.apply(&ones).unwrap();
            assert!(row.iter().all(|s| s.abs() < 1e-14));
        }
    }

    #[test]
    fn cij_reproduces_derivative() {
        // Σ_j (1,0)·c_ij sin(x1_j) ≈ ∫ cos(x1) φ_i
        let n = 32;
        let o = ops(n);
        let theta: Vec<f64> = o.mesh.vertices().iter().map(|p| p[0].sin()).collect();
        let u = VectorField2::constant(o.num_vertices(), [1.0, 0.0]);
        let flux = o.transport_flux(&u, &theta);
        let h = o.mesh.h();
        let vt = o.mesh.vertex_triangles();
        let mut worst = 0.0f64;
        for i in 0..o.num_vertices() {
            let mut exact = 0.0;
            for &t in &vt[i] {
                let tri = o.mesh.triangles()[t];
                let xs = o.mesh.triangle_coords(t);
                let local = tri.iter().position(|&v| v == i).unwrap();
                exact += brute_element_integral(o.mesh.signed_area(t), |l0, l1, l2| {
                    let l = [l0, l1, l2];
                    let x1 = l0 * xs[0][0] + l1 * xs[1][0] + l2 * xs[2][0];
                    x1.cos() * l[local]
                });
            }
            worst = worst.max((flux[i] - exact).abs() / (h * h));
        }
        // relative to m_i = h², error O(h²)
        assert!(worst < h * h, "worst {worst}");
    }

    #[test]
    fn assembly_is_deterministic() {
        let a = ops(12);
        let b = ops(12);
        assert_eq!(a.mass.values(), b.mass.values());
        assert_eq!(a.stiffness.values(), b.stiffness.values());
        assert_eq!(a.c1.values(), b.c1.values());
        assert_eq!(a.c2.values(), b.c2.values());
    }
}
