//! Replacement-library fitting for one part.
//!
//! A part animation `X` (one column per frame) is approximated by a library
//! `R` of `d` pieces and a per-frame label `l`, minimizing
//!
//! ```text
//! E(R, l) = 1/2 |X - R S(l)|_W^2 + lambda/2 |(X - R S(l)) G|_W^2
//! ```
//!
//! where `S(l)` selects one piece per frame, `G` is the cut-aware forward
//! difference and `W` repeats per-vertex saliency weights over coordinates.
//! Optimization alternates an exact library update (a `d x d` linear system)
//! with an exact chain labeling (dynamic programming over frames), from
//! several random initial labelings.
//!
//! Labels are 0-based throughout.

mod assign;
mod bcd;
mod energy;
mod prepared;
mod sweep;
mod update;

use nalgebra::DMatrix;

use crate::anim::{Anim, DiffOperator};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use assign::assign_labels;
pub use bcd::{bcd_optimize, initial_assignment, restart_rng, IterationRecord, OptimResult, RestartRun};
pub use energy::{energy_terms, frame_errors, incident_frame_error, total_energy, EnergyTerms, FrameError};
pub use sweep::{
    lambda_sweep, min_library_for_cap, pieces_needed_curve, sweep_library_size, uniform_sampling_library,
    LambdaPoint, SweepPoint,
};
pub use update::update_library;

/// Default velocity weight.
pub const DEFAULT_LAMBDA: f64 = 2.0;
pub const DEFAULT_RESTARTS: usize = 8;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Animation of one part's sub-mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PartAnim<T> {
    pub anim: Anim<T>,
    /// Global vertex index of each sub-mesh vertex.
    pub global_vertices: Vec<usize>,
}

impl<T: Real> PartAnim<T> {
    pub fn new(anim: Anim<T>, global_vertices: Vec<usize>) -> Result<Self> {
        if global_vertices.len() != anim.n_vertices() {
            return Err(Error::Dimension(format!(
                "{} global indices for {} vertices",
                global_vertices.len(),
                anim.n_vertices()
            )));
        }
        Ok(Self { anim, global_vertices })
    }

    /// The whole mesh as a single part.
    pub fn whole(anim: Anim<T>) -> Self {
        let global_vertices = (0..anim.n_vertices()).collect();
        Self { anim, global_vertices }
    }

    pub fn n_frames(&self) -> usize {
        self.anim.n_frames()
    }

    pub fn n_vertices(&self) -> usize {
        self.anim.n_vertices()
    }

    /// Length of one flattened frame, `3m`.
    pub fn dim(&self) -> usize {
        3 * self.anim.n_vertices()
    }

    pub fn diff(&self) -> DiffOperator {
        DiffOperator::from_cuts(self.anim.cuts())
    }

    /// Frame `f` as `3m` interleaved coordinates.
    pub fn frame_coords(&self, f: usize) -> &[T] {
        self.anim.frame(f).as_flattened()
    }

    /// All frames as `3m x n`, one column per frame.
    pub fn matrix(&self) -> nalgebra::DMatrixView<'_, T> {
        nalgebra::DMatrixView::from_slice(self.anim.positions().as_flattened(), self.dim(), self.n_frames())
    }
}

/// Non-negative per-vertex saliency weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyWeights<T> {
    pub w: Vec<T>,
}

impl<T: Real> SaliencyWeights<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.iter().any(|&x| !x.is_finite_value() || x < T::zero()) {
            return Err(Error::InvalidConfig("saliency weights must be finite and non-negative".into()));
        }
        if w.iter().all(|&x| x == T::zero()) {
            return Err(Error::InvalidConfig("saliency weights are all zero".into()));
        }
        Ok(Self { w })
    }

    pub fn uniform(m: usize) -> Self {
        Self { w: vec![T::one(); m] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Diagonal of `W`: each weight repeated for x, y, z.
    pub fn coordinate_weights(&self) -> Vec<T> {
        self.w.iter().flat_map(|&x| [x, x, x]).collect()
    }

    pub(crate) fn check(&self, part: &PartAnim<T>) -> Result<()> {
        if self.w.len() != part.n_vertices() {
            return Err(Error::Dimension(format!(
                "{} saliency weights for {} vertices",
                self.w.len(),
                part.n_vertices()
            )));
        }
        Ok(())
    }
}

/// `d` pieces of one part, one `3m` column each.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplacementLibrary<T: Real> {
    pub pieces: DMatrix<T>,
    /// Pieces whose geometry must stay bit-identical.
    pub frozen: Vec<bool>,
}

impl<T: Real> ReplacementLibrary<T> {
    pub fn new(pieces: DMatrix<T>, frozen: Vec<bool>) -> Result<Self> {
        if pieces.ncols() == 0 {
            return Err(Error::InvalidConfig("library needs at least one piece".into()));
        }
        if frozen.len() != pieces.ncols() || pieces.nrows() % 3 != 0 {
            return Err(Error::Dimension("library pieces and frozen flags disagree".into()));
        }
        Ok(Self { pieces, frozen })
    }

    pub fn from_fields(fields: &[Vec<[T; 3]>], frozen: Vec<bool>) -> Result<Self> {
        let m = fields.first().map_or(0, Vec::len);
        if fields.iter().any(|f| f.len() != m) {
            return Err(Error::Dimension("library pieces differ in vertex count".into()));
        }
        let flat: Vec<T> = fields.iter().flat_map(|f| f.as_flattened().iter().copied()).collect();
        Self::new(DMatrix::from_vec(3 * m, fields.len(), flat), frozen)
    }

    /// All pieces frozen.
    pub fn fixed(pieces: DMatrix<T>) -> Result<Self> {
        let d = pieces.ncols();
        Self::new(pieces, vec![true; d])
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.ncols()
    }

    pub fn n_vertices(&self) -> usize {
        self.pieces.nrows() / 3
    }

    pub fn piece(&self, k: usize) -> Vec<[T; 3]> {
        self.pieces.column(k).as_slice().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    pub fn is_frozen(&self, k: usize) -> bool {
        self.frozen[k]
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen.iter().all(|&f| f)
    }

    pub(crate) fn check(&self, part: &PartAnim<T>) -> Result<()> {
        if self.pieces.nrows() != part.dim() {
            return Err(Error::Dimension(format!(
                "library has {} vertices, part has {}",
                self.n_vertices(),
                part.n_vertices()
            )));
        }
        Ok(())
    }
}

/// Piece index per frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }

    /// Number of frames per piece.
    pub fn counts(&self, d: usize) -> Vec<usize> {
        let mut c = vec![0; d];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Dense selector `S` (`d x n`), `S[k][f] = 1` iff frame `f` shows piece `k`.
    pub fn selector<T: Real>(&self, d: usize) -> DMatrix<T> {
        let mut s = DMatrix::zeros(d, self.labels.len());
        for (f, &l) in self.labels.iter().enumerate() {
            s[(l, f)] = T::one();
        }
        s
    }

    /// Number of consecutive frame pairs with different labels.
    pub fn transitions(&self) -> usize {
        self.labels.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub(crate) fn check(&self, part_frames: usize, d: usize) -> Result<()> {
        if self.labels.len() != part_frames {
            return Err(Error::Dimension(format!("{} labels for {} frames", self.labels.len(), part_frames)));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= d) {
            return Err(Error::InvalidConfig(format!("label {l} out of range for {d} pieces")));
        }
        Ok(())
    }
}

/// Block coordinate descent settings.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig<T> {
    pub lambda: T,
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for OptimConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(DEFAULT_LAMBDA),
            restarts: DEFAULT_RESTARTS,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: T::lit(DEFAULT_REL_TOL),
            seed: 0,
        }
    }
}

impl<T: Real> OptimConfig<T> {
    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite_value() {
            return Err(Error::InvalidConfig("lambda must be finite and non-negative".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("at least one restart is required".into()));
        }
        if !(self.rel_tol >= T::zero()) {
            return Err(Error::InvalidConfig("relative tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite_value() {
        return Err(Error::InvalidConfig("lambda must be finite and non-negative".into()));
    }
    Ok(())
}

/// Triangle strip over `m >= 3` vertices.
#[cfg(test)]
pub(crate) fn strip(m: usize) -> Vec<[usize; 3]> {
    (0..m - 2).map(|i| [i, i + 1, i + 2]).collect()
}
