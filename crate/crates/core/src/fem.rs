//! Linear FEM operators on triangle meshes.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::{corner_cotangents, triangle_area};
use crate::scalar::Real;

/// Symmetric cotangent Laplacian `L` (negative semi-definite, zero row sums)
/// and diagonal lumped mass `M` of a mesh.
#[derive(Clone, Debug)]
pub struct FemOperators<T: Real> {
    pub laplacian: CsrMatrix<T>,
    pub mass: Vec<T>,
}

/// `L_ij = (cot a_ij + cot b_ij) / 2` off the diagonal, `L_ii = -sum_j L_ij`.
pub fn cotangent_laplacian<T: Real>(points: &[[T; 3]], triangles: &[[usize; 3]]) -> CsrMatrix<T> {
    let m = points.len();
    let mut coo = CooMatrix::new(m, m);
    let half = T::lit(0.5);
    for tri in triangles {
        let cot = corner_cotangents(points, tri);
        for c in 0..3 {
            // corner c is opposite edge (c+1, c+2)
            let (i, j) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
            let w = cot[c] * half;
            coo.push(i, j, w);
            coo.push(j, i, w);
            coo.push(i, i, -w);
            coo.push(j, j, -w);
        }
    }
    CsrMatrix::from(&coo)
}

/// Barycentric lumped mass: a third of each incident triangle's area.
pub fn lumped_mass<T: Real>(points: &[[T; 3]], triangles: &[[usize; 3]]) -> Vec<T> {
    let mut mass = vec![T::zero(); points.len()];
    let third = T::one() / T::lit(3.0);
    for tri in triangles {
        let a = triangle_area(points, tri) * third;
        for &v in tri {
            mass[v] += a;
        }
    }
    mass
}

impl<T: Real> FemOperators<T> {
    pub fn new(points: &[[T; 3]], triangles: &[[usize; 3]]) -> Self {
        Self {
            laplacian: cotangent_laplacian(points, triangles),
            mass: lumped_mass(points, triangles),
        }
    }

    /// `L^T M^-1 L`, the discrete squared-Laplacian energy matrix.
    pub fn bilaplacian(&self) -> Result<CsrMatrix<T>> {
        if let Some(v) = self.mass.iter().position(|&a| !(a > T::zero())) {
            return Err(Error::SolveFailure(format!("vertex {v} has zero lumped mass")));
        }
        let mut scaled = self.laplacian.clone();
        let offsets = scaled.row_offsets().to_vec();
        let values = scaled.values_mut();
        for (r, w) in offsets.windows(2).enumerate() {
            let inv = T::one() / self.mass[r];
            for v in &mut values[w[0]..w[1]] {
                *v *= inv;
            }
        }
        // L is symmetric, so L^T = L.
        Ok(&self.laplacian * &scaled)
    }
}

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    let mut nbrs = Vec::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let head = order.len();
        order.push(start);
        let mut i = head;
        while i < order.len() {
            let u = order[i];
            nbrs.clear();
            nbrs.extend(adjacency[u].iter().copied().filter(|&v| !visited[v]));
            nbrs.sort_by_key(|&v| (degree[v], v));
            for &v in &nbrs {
                if !visited[v] {
                    visited[v] = true;
                    order.push(v);
                }
            }
            i += 1;
        }
    }
    order.reverse();
    order
}
