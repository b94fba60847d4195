//! Uniform periodic triangulation of the square torus (0, 2π)².
//!
//! Vertex `(i1, i2)` has id `i2 * n_side + i1`. Every grid cell is split
//! along its lower-left to upper-right diagonal, so each vertex touches six
//! triangles and overlaps with the supports of exactly six neighbours:
//! E, W, N, S, NE and SW.

use std::f64::consts::PI;

use crate::error::{Result, SqgError};

/// Side length of the periodic domain.
pub const DOMAIN_LENGTH: f64 = 2.0 * PI;

/// Offsets `(d1, d2)` of the stencil members of a vertex, self first.
///
/// The order is fixed; column indices in the sparse layout are sorted by
/// vertex id instead (see [`TorusMesh::stencil`]).
pub const STENCIL_OFFSETS: [(isize, isize); 7] =
    [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)];

#[derive(Clone, Debug)]
pub struct TorusMesh {
    n_side: usize,
    h: f64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Sorted stencil of each vertex, self included.
    adjacency: Vec<[usize; 7]>,
}

impl TorusMesh {
    /// Builds the uniform mesh with `n_side` distinct vertices per direction.
    pub fn build_uniform(n_side: usize) -> Result<Self> {
        if n_side < 4 {
            return Err(SqgError::InvalidMesh(format!(
                "n_side must be at least 4, got {n_side}"
            )));
        }
        let h = DOMAIN_LENGTH / n_side as f64;
        let n = n_side;
        let id = |i1: usize, i2: usize| (i2 % n) * n + (i1 % n);

        let mut vertices = Vec::with_capacity(n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                vertices.push([i1 as f64 * h, i2 as f64 * h]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                let sw = id(i1, i2);
                let se = id(i1 + 1, i2);
                let ne = id(i1 + 1, i2 + 1);
                let nw = id(i1, i2 + 1);
                triangles.push([sw, se, ne]);
                triangles.push([sw, ne, nw]);
            }
        }

        let adjacency = (0..n * n)
            .map(|v| {
                let (i1, i2) = (v % n, v / n);
                let mut s = STENCIL_OFFSETS.map(|(d1, d2)| {
                    id(
                        (i1 as isize + d1).rem_euclid(n as isize) as usize,
                        (i2 as isize + d2).rem_euclid(n as isize) as usize,
                    )
                });
                s.sort_unstable();
                s
            })
            .collect();

        Ok(Self {
            n_side,
            h,
            vertices,
            triangles,
            adjacency,
        })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    /// Grid spacing `2π / n_side`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Grid coordinates `(i1, i2)` of a vertex id.
    pub fn grid_index(&self, v: usize) -> (usize, usize) {
        (v % self.n_side, v / self.n_side)
    }

    /// Vertex id of the (periodically wrapped) grid point `(i1, i2)`.
    pub fn vertex_id(&self, i1: isize, i2: isize) -> usize {
        let n = self.n_side as isize;
        (i2.rem_euclid(n) * n + i1.rem_euclid(n)) as usize
    }

    /// Index set I(i) of vertices whose hat functions overlap φ_i, sorted
    /// ascending, `i` included.
    pub fn stencil(&self, i: usize) -> Result<&[usize; 7]> {
        self.adjacency.get(i).ok_or(SqgError::IndexOutOfRange {
            index: i,
            count: self.num_vertices(),
        })
    }

    pub(crate) fn stencil_unchecked(&self, i: usize) -> &[usize; 7] {
        &self.adjacency[i]
    }

    /// Unwrapped corner coordinates of a triangle.
    ///
    /// Corners that wrapped across the periodic seam are shifted back so the
    /// triangle is geometrically contiguous.
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        let base = self.vertices[tri[0]];
        tri.map(|v| {
            let mut p = self.vertices[v];
            for d in 0..2 {
                if p[d] < base[d] - 0.5 * DOMAIN_LENGTH {
                    p[d] += DOMAIN_LENGTH;
                }
            }
            p
        })
    }

    /// Signed area of a triangle (positive for counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Gradients of the three local hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangle_coords(t);
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        // ∇λ_k = perp(edge opposite k) / (2|K|)
        let grad = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
        [grad(b, c), grad(c, a), grad(a, b)]
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::with_capacity(6); self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashMap};

    /// Brute-force overlap: two hats overlap iff they share a triangle.
    fn brute_stencil(mesh: &TorusMesh, i: usize) -> BTreeSet<usize> {
        mesh.triangles()
            .iter()
            .filter(|t| t.contains(&i))
            .flat_map(|t| t.iter().copied())
            .collect()
    }

    #[test]
    fn counts_and_areas() {
        let mesh = TorusMesh::build_uniform(4).unwrap();
        assert_eq!(mesh.num_vertices(), 16);
        assert_eq!(mesh.triangles().len(), 32);
        let expected = (PI / 2.0).powi(2) / 2.0;
        for t in 0..32 {
            assert!((mesh.signed_area(t) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn total_area_is_torus_area() {
        let mesh = TorusMesh::build_uniform(8).unwrap();
        let total: f64 = (0..mesh.triangles().len())
            .map(|t| mesh.signed_area(t))
            .sum();
        assert!((total - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_meshes() {
        assert!(matches!(
            TorusMesh::build_uniform(3),
            Err(SqgError::InvalidMesh(_))
        ));
    }

    #[test]
    fn corner_stencil_matches_brute_force() {
        let mesh = TorusMesh::build_uniform(4).unwrap();
        let s: BTreeSet<usize> = mesh.stencil(0).unwrap().iter().copied().collect();
        assert_eq!(s, brute_stencil(&mesh, 0));
        let expected: BTreeSet<usize> =
            [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)]
                .iter()
                .map(|&(a, b)| mesh.vertex_id(a, b))
                .collect();
        assert_eq!(s, expected);
        assert_eq!(s.len(), 7);
    }

    #[test]
    fn interior_stencil_is_translate() {
        let mesh = TorusMesh::build_uniform(4).unwrap();
        let v = mesh.vertex_id(1, 1);
        let s: BTreeSet<usize> = mesh.stencil(v).unwrap().iter().copied().collect();
        assert_eq!(s, brute_stencil(&mesh, v));
        let expected: BTreeSet<usize> = STENCIL_OFFSETS
            .iter()
            .map(|&(a, b)| mesh.vertex_id(1 + a, 1 + b))
            .collect();
        assert_eq!(s, expected);
    }

    #[test]
    fn stencil_is_symmetric_and_reflexive() {
        let mesh = TorusMesh::build_uniform(6).unwrap();
        for i in 0..mesh.num_vertices() {
            let si = mesh.stencil(i).unwrap();
            assert!(si.contains(&i));
            for j in 0..mesh.num_vertices() {
                let sj = mesh.stencil(j).unwrap();
                assert_eq!(si.contains(&j), sj.contains(&i));
            }
        }
    }

    #[test]
    fn stencil_out_of_range() {
        let mesh = TorusMesh::build_uniform(8).unwrap();
        assert!(mesh.stencil(64).is_err());
        assert!(mesh.stencil(63).unwrap().contains(&63));
    }

    #[test]
    fn every_edge_shared_by_two_triangles() {
        let mesh = TorusMesh::build_uniform(5).unwrap();
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
        assert_eq!(edges.len(), 3 * 25);
    }

    #[test]
    fn hat_gradients_sum_to_zero() {
        let mesh = TorusMesh::build_uniform(6).unwrap();
        for t in 0..mesh.triangles().len() {
            let g = mesh.hat_gradients(t);
            for d in 0..2 {
                assert!((g[0][d] + g[1][d] + g[2][d]).abs() < 1e-12);
            }
        }
    }
}
