//! Animated triangle-mesh sequences with shared connectivity.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-vertex 3D positions for one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexField<T> {
    pub values: Vec<[T; 3]>,
}

impl<T: Real> VertexField<T> {
    pub fn new(values: Vec<[T; 3]>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> ([T; 3], [T; 3]) {
        bounding_box(&self.values)
    }
}

pub(crate) fn bounding_box<T: Real>(points: &[[T; 3]]) -> ([T; 3], [T; 3]) {
    let mut lo = [T::INFINITY; 3];
    let mut hi = [-T::INFINITY; 3];
    for p in points {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

/// An `n`-frame animation of an `m`-vertex, `k`-triangle mesh.
///
/// Positions are stored frame-major: vertex `i` of frame `f` lives at
/// `f * m + i`. `cuts[f]` marks frames that begin a new, unrelated clip;
/// frame 0 is always a cut.
#[derive(Clone, Debug, PartialEq)]
pub struct Anim<T> {
    positions: Vec<[T; 3]>,
    n_vertices: usize,
    triangles: Vec<[usize; 3]>,
    cuts: Vec<bool>,
}

impl<T: Real> Anim<T> {
    /// Builds and validates a sequence from per-frame vertex lists.
    pub fn new(frames: Vec<Vec<[T; 3]>>, triangles: Vec<[usize; 3]>, cuts: Vec<bool>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptyInput);
        };
        let m = first.len();
        for (f, frame) in frames.iter().enumerate() {
            if frame.len() != m {
                return Err(Error::ConnectivityMismatch(f));
            }
        }
        let positions = frames.into_iter().flatten().collect();
        Self::from_flat(positions, m, triangles, cuts)
    }

    /// Builds a sequence from frame-major flat positions (`n * m` points).
    pub fn from_flat(
        positions: Vec<[T; 3]>,
        n_vertices: usize,
        triangles: Vec<[usize; 3]>,
        mut cuts: Vec<bool>,
    ) -> Result<Self> {
        if positions.is_empty() || n_vertices == 0 {
            return Err(Error::EmptyInput);
        }
        if positions.len() % n_vertices != 0 {
            return Err(Error::Dimension(format!(
                "{} positions is not a multiple of {} vertices",
                positions.len(),
                n_vertices
            )));
        }
        let n = positions.len() / n_vertices;
        if n_vertices < 3 || triangles.is_empty() {
            return Err(Error::InvalidMesh(format!(
                "need at least 3 vertices and 1 triangle, got {} and {}",
                n_vertices,
                triangles.len()
            )));
        }
        if cuts.len() != n {
            return Err(Error::Dimension(format!("{} cut flags for {} frames", cuts.len(), n)));
        }
        let mut referenced = vec![false; n_vertices];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v}")));
                }
                referenced[v] = true;
            }
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        if positions.iter().flatten().any(|x| !x.is_finite_value()) {
            return Err(Error::InvalidMesh("non-finite coordinate".into()));
        }
        cuts[0] = true;
        Ok(Self {
            positions,
            n_vertices,
            triangles,
            cuts,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.positions.len() / self.n_vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn cuts(&self) -> &[bool] {
        &self.cuts
    }

    pub fn frame(&self, f: usize) -> &[[T; 3]] {
        &self.positions[f * self.n_vertices..(f + 1) * self.n_vertices]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[[T; 3]]> + '_ {
        self.positions.chunks_exact(self.n_vertices)
    }

    pub fn frame_field(&self, f: usize) -> VertexField<T> {
        VertexField::new(self.frame(f).to_vec())
    }

    pub fn positions(&self) -> &[[T; 3]] {
        &self.positions
    }

    /// Same connectivity and cuts, positions mapped point by point.
    pub fn map_positions(&self, mut op: impl FnMut([T; 3]) -> [T; 3]) -> Self {
        Self {
            positions: self.positions.iter().map(|&p| op(p)).collect(),
            n_vertices: self.n_vertices,
            triangles: self.triangles.clone(),
            cuts: self.cuts.clone(),
        }
    }

    /// Replaces every frame, keeping connectivity and cuts.
    pub fn with_positions(&self, positions: Vec<[T; 3]>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::Dimension(format!(
                "expected {} positions, got {}",
                self.positions.len(),
                positions.len()
            )));
        }
        Ok(Self {
            positions,
            n_vertices: self.n_vertices,
            triangles: self.triangles.clone(),
            cuts: self.cuts.clone(),
        })
    }

    /// Replaces the cut flags; frame 0 stays a cut.
    pub fn with_cuts(mut self, cuts: Vec<bool>) -> Result<Self> {
        if cuts.len() != self.n_frames() {
            return Err(Error::Dimension(format!(
                "{} cut flags for {} frames",
                cuts.len(),
                self.n_frames()
            )));
        }
        self.cuts = cuts;
        self.cuts[0] = true;
        Ok(self)
    }
}

/// Per-vertex arithmetic mean over all frames.
pub fn average_mesh<T: Real>(anim: &Anim<T>) -> VertexField<T> {
    let m = anim.n_vertices();
    let mut acc = vec![[T::zero(); 3]; m];
    for frame in anim.frames() {
        for (a, p) in acc.iter_mut().zip(frame) {
            a[0] += p[0];
            a[1] += p[1];
            a[2] += p[2];
        }
    }
    let inv = T::one() / T::from_usize_lossy(anim.n_frames());
    for a in &mut acc {
        a[0] *= inv;
        a[1] *= inv;
        a[2] *= inv;
    }
    VertexField::new(acc)
}

/// Sparse temporal forward-difference operator (`n x (n-1)`).
///
/// Column `g` is `-1` at row `g` and `+1` at row `g + 1`, unless either frame
/// is a cut (frame 0 excluded, it has no predecessor), in which case the
/// column is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOperator {
    n_frames: usize,
    active: Vec<bool>,
}

impl DiffOperator {
    pub fn from_cuts(cuts: &[bool]) -> Self {
        let n = cuts.len();
        let is_cut = |f: usize| f > 0 && cuts[f];
        let active = (0..n.saturating_sub(1)).map(|g| !(is_cut(g) || is_cut(g + 1))).collect();
        Self { n_frames: n, active }
    }

    pub fn n_rows(&self) -> usize {
        self.n_frames
    }

    pub fn n_cols(&self) -> usize {
        self.active.len()
    }

    /// Whether column `g` (difference between frames `g` and `g + 1`) is nonzero.
    pub fn is_active(&self, g: usize) -> bool {
        self.active[g]
    }

    /// Indices of nonzero columns.
    pub fn active_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter(|(_, &a)| a).map(|(g, _)| g)
    }

    /// Entry `G[f][g]`.
    pub fn entry(&self, f: usize, g: usize) -> i8 {
        if !self.active[g] {
            0
        } else if f == g {
            -1
        } else if f == g + 1 {
            1
        } else {
            0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        (0..self.n_frames)
            .map(|f| (0..self.n_cols()).map(|g| self.entry(f, g)).collect())
            .collect()
    }
}

pub fn forward_difference<T: Real>(anim: &Anim<T>) -> DiffOperator {
    DiffOperator::from_cuts(anim.cuts())
}
