//! Seam homogenization: minimal per-frame deformation that pins the seam
//! and its one-ring to the animation average.
//!
//! For each frame `y` the displacement `D = z - y` minimizes
//! `tr(D^T L M^-1 L D)` (squared cotangent Laplacian of the average mesh,
//! lumped mass) with `D = avg - y` on the constrained vertices. Constrained
//! rows are eliminated; the free block is factorized once and reused for
//! every frame and coordinate.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::anim::{average_mesh, Anim, VertexField};
use crate::boundary::SegmentedAnim;
use crate::error::{Error, Result};
use crate::fem::{reverse_cuthill_mckee, FemOperators};
use crate::mesh::Topology;
use crate::scalar::Real;

/// Homogenized animation: seam and one-ring identical in every frame.
#[derive(Clone, Debug)]
pub struct HomogenizedAnim<T> {
    pub anim: Anim<T>,
    pub part_labels: Vec<usize>,
    pub n_parts: usize,
    pub seam_vertices: Vec<usize>,
    /// Sorted constrained vertices (seam plus one-ring).
    pub constrained: Vec<usize>,
    /// Target position of each constrained vertex, in `constrained` order.
    pub seam_target: Vec<[T; 3]>,
}

/// Seam vertices plus every vertex sharing an edge with one.
pub fn seam_constraint_set<T: Real>(seg: &SegmentedAnim<T>) -> Result<Vec<usize>> {
    let m = seg.anim.n_vertices();
    let topo = Topology::new(m, seg.anim.triangles());
    let mut mark = vec![false; m];
    for &v in &seg.seam_vertices {
        mark[v] = true;
        for &u in &topo.vertex_neighbors[v] {
            mark[u] = true;
        }
    }
    let set: Vec<usize> = (0..m).filter(|&v| mark[v]).collect();
    if !set.is_empty() && set.len() == m {
        return Err(Error::OverConstrained);
    }
    Ok(set)
}

/// Factorized reduced system, shared across frames.
pub struct HomogenizeSolver<T: Real> {
    n_vertices: usize,
    constrained: Vec<usize>,
    /// Free vertices that share a component with a constraint, in solve order.
    solve_order: Vec<usize>,
    /// Reduced position of each vertex, if solved for.
    slot: Vec<Option<usize>>,
    /// Column of each constrained vertex in `coupling`.
    constrained_col: Vec<Option<usize>>,
    coupling: CsrMatrix<T>,
    energy_matrix: CsrMatrix<T>,
    factor: Option<CscCholesky<T>>,
}

impl<T: Real> HomogenizeSolver<T> {
    pub fn new(ops: &FemOperators<T>, triangles: &[[usize; 3]], constrained: &[usize]) -> Result<Self> {
        let m = ops.mass.len();
        if constrained.is_empty() {
            return Err(Error::InvalidConfig("homogenization needs at least one constrained vertex".into()));
        }
        if constrained.len() >= m {
            return Err(Error::OverConstrained);
        }
        let q = ops.bilaplacian()?;
        let mut constrained_col = vec![None; m];
        let mut sorted = constrained.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for (c, &v) in sorted.iter().enumerate() {
            if v >= m {
                return Err(Error::Dimension(format!("constrained vertex {v} out of range")));
            }
            constrained_col[v] = Some(c);
        }

        // Components without any constraint keep D = 0 (the minimum-norm minimizer).
        let topo = Topology::new(m, triangles);
        let comp = vertex_components(&topo);
        let n_comp = comp.iter().max().map_or(0, |c| c + 1);
        let mut anchored = vec![false; n_comp];
        for &v in &sorted {
            anchored[comp[v]] = true;
        }
        let free: Vec<usize> = (0..m).filter(|&v| constrained_col[v].is_none() && anchored[comp[v]]).collect();

        let mut local = vec![usize::MAX; m];
        for (i, &v) in free.iter().enumerate() {
            local[v] = i;
        }
        let adjacency: Vec<Vec<usize>> = free
            .iter()
            .map(|&v| {
                let row = q.row(v);
                row.col_indices().iter().filter(|&&u| u != v && local[u] != usize::MAX).map(|&u| local[u]).collect()
            })
            .collect();
        let order: Vec<usize> = reverse_cuthill_mckee(&adjacency).into_iter().map(|i| free[i]).collect();
        let mut slot = vec![None; m];
        for (i, &v) in order.iter().enumerate() {
            slot[v] = Some(i);
        }

        let nf = order.len();
        let mut ff = CooMatrix::new(nf, nf);
        let mut fc = CooMatrix::new(nf, sorted.len());
        for (i, &v) in order.iter().enumerate() {
            let row = q.row(v);
            for (&u, &val) in row.col_indices().iter().zip(row.values()) {
                if let Some(j) = slot[u] {
                    ff.push(i, j, val);
                } else if let Some(c) = constrained_col[u] {
                    fc.push(i, c, val);
                }
            }
        }
        let factor = if nf > 0 {
            let system = CscMatrix::from(&ff);
            Some(
                CscCholesky::factor(&system)
                    .map_err(|e| Error::SolveFailure(format!("reduced bi-Laplacian not positive definite: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            n_vertices: m,
            constrained: sorted,
            solve_order: order,
            slot,
            constrained_col,
            coupling: CsrMatrix::from(&fc),
            energy_matrix: q,
            factor,
        })
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn is_constrained(&self, v: usize) -> bool {
        self.constrained_col[v].is_some()
    }

    /// Deforms one frame toward `target` on the constrained set.
    pub fn solve(&self, frame: &[[T; 3]], target: &[[T; 3]]) -> Result<Vec<[T; 3]>> {
        if frame.len() != self.n_vertices || target.len() != self.n_vertices {
            return Err(Error::Dimension("frame size does not match the solver".into()));
        }
        let mut out = frame.to_vec();
        for &v in &self.constrained {
            out[v] = target[v];
        }
        let Some(factor) = &self.factor else {
            return Ok(out);
        };
        let nc = self.constrained.len();
        let mut fixed = DMatrix::<T>::zeros(nc, 3);
        for (c, &v) in self.constrained.iter().enumerate() {
            for k in 0..3 {
                fixed[(c, k)] = target[v][k] - frame[v][k];
            }
        }
        let mut rhs = DMatrix::<T>::zeros(self.solve_order.len(), 3);
        for (i, row) in self.coupling.row_iter().enumerate() {
            for (&c, &val) in row.col_indices().iter().zip(row.values()) {
                for k in 0..3 {
                    rhs[(i, k)] -= val * fixed[(c, k)];
                }
            }
        }
        let disp = factor.solve(&rhs);
        if disp.iter().any(|x| !x.is_finite_value()) {
            return Err(Error::SolveFailure("non-finite displacement".into()));
        }
        for (i, &v) in self.solve_order.iter().enumerate() {
            for k in 0..3 {
                out[v][k] = frame[v][k] + disp[(i, k)];
            }
        }
        Ok(out)
    }

    /// `tr(D^T L M^-1 L D)` for `D = z - y`.
    pub fn deformation_energy(&self, z: &[[T; 3]], y: &[[T; 3]]) -> T {
        let mut e = T::zero();
        for (v, row) in self.energy_matrix.row_iter().enumerate() {
            for (&u, &val) in row.col_indices().iter().zip(row.values()) {
                for k in 0..3 {
                    e += (z[v][k] - y[v][k]) * val * (z[u][k] - y[u][k]);
                }
            }
        }
        e
    }

    /// Whether `v` is part of the reduced solve.
    pub fn is_solved(&self, v: usize) -> bool {
        self.slot[v].is_some()
    }
}

fn vertex_components(topo: &Topology) -> Vec<usize> {
    let m = topo.n_vertices();
    let mut comp = vec![usize::MAX; m];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..m {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &u in &topo.vertex_neighbors[v] {
                if comp[u] == usize::MAX {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Homogenizes a single frame; builds and factorizes the system each call.
pub fn homogenize_frame<T: Real>(
    y_f: &VertexField<T>,
    avg: &VertexField<T>,
    ops: &FemOperators<T>,
    triangles: &[[usize; 3]],
    constrained: &[usize],
) -> Result<VertexField<T>> {
    let solver = HomogenizeSolver::new(ops, triangles, constrained)?;
    Ok(VertexField::new(solver.solve(&y_f.values, &avg.values)?))
}

/// Homogenizes every frame with one shared factorization.
pub fn homogenize_all<T: Real>(seg: &SegmentedAnim<T>) -> Result<HomogenizedAnim<T>> {
    let constrained = seam_constraint_set(seg)?;
    let avg = average_mesh(&seg.anim);
    let anim = if constrained.is_empty() {
        seg.anim.clone()
    } else {
        let ops = FemOperators::new(&avg.values, seg.anim.triangles());
        let solver = HomogenizeSolver::new(&ops, seg.anim.triangles(), &constrained)?;
        let frames: Vec<Vec<[T; 3]>> = (0..seg.anim.n_frames())
            .into_par_iter()
            .map(|f| solver.solve(seg.anim.frame(f), &avg.values))
            .collect::<Result<_>>()?;
        seg.anim.with_positions(frames.into_iter().flatten().collect())?
    };
    let seam_target = constrained.iter().map(|&v| avg.values[v]).collect();
    Ok(HomogenizedAnim {
        anim,
        part_labels: seg.part_labels.clone(),
        n_parts: seg.n_parts,
        seam_vertices: seg.seam_vertices.clone(),
        constrained,
        seam_target,
    })
}
