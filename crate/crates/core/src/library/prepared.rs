//! Frame data shared by every restart of one optimization.
//!
//! Pieces are kept as coefficients over the centered frames plus held
//! (frozen) pieces, `R = Xc P + Fc Q`, so all per-iteration quantities reduce
//! to products with the weighted Gram matrix `K = Xc^T W Xc`. Very long
//! sequences skip the Gram matrix and multiply explicit pieces instead.

use nalgebra::DMatrix;

use crate::anim::DiffOperator;
use crate::scalar::Real;

use super::{PartAnim, ReplacementLibrary, SaliencyWeights};

/// Longest sequence for which the `n x n` Gram matrix is formed.
pub(crate) const GRAM_MAX_FRAMES: usize = 4096;

pub(crate) struct Prepared<T: Real> {
    pub n: usize,
    pub diff: DiffOperator,
    pub active: Vec<bool>,
    w: Vec<T>,
    mean: Vec<T>,
    xc: DMatrix<T>,
    /// `|xc_f|_W^2`
    pub xx: Vec<T>,
    /// `|xc_{g+1} - xc_g|_W^2` on active pairs, zero elsewhere.
    pub dxx: Vec<T>,
    gram: Option<DMatrix<T>>,
    /// Library indices of held pieces, in `Q` row order.
    pub held: Vec<usize>,
    fc: DMatrix<T>,
    /// `Xc^T W Fc`
    h: DMatrix<T>,
    /// `Fc^T W Fc`
    j: DMatrix<T>,
}

/// Piece coefficients: `R = Xc P + Fc Q`.
#[derive(Clone, Debug)]
pub(crate) struct Model<T: Real> {
    pub p: DMatrix<T>,
    pub q: DMatrix<T>,
}

/// Frame-piece inner products `C = Xc^T W R` and piece Gram `N = R^T W R`.
pub(crate) struct Cross<T: Real> {
    pub c: DMatrix<T>,
    pub nn: DMatrix<T>,
}

impl<T: Real> Prepared<T> {
    pub fn new(
        part: &PartAnim<T>,
        weights: &SaliencyWeights<T>,
        frozen: Option<&ReplacementLibrary<T>>,
        use_gram: bool,
    ) -> Self {
        let n = part.n_frames();
        let dim = part.dim();
        let x = part.matrix();
        let w = weights.coordinate_weights();
        let inv_n = T::one() / T::from_usize_lossy(n);
        let mut mean = vec![T::zero(); dim];
        for f in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.column(f).iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_n);
        let mut xc = x.into_owned();
        for mut col in xc.column_iter_mut() {
            for (v, &m) in col.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let wnorm = |get: &dyn Fn(usize) -> T| {
            let mut s = T::zero();
            for (i, &wi) in w.iter().enumerate() {
                let e = get(i);
                s += wi * e * e;
            }
            s
        };
        let xx = (0..n).map(|f| wnorm(&|i| xc[(i, f)])).collect();
        let diff = part.diff();
        let active: Vec<bool> = (0..n.saturating_sub(1)).map(|g| diff.is_active(g)).collect();
        let dxx = (0..n.saturating_sub(1))
            .map(|g| if active[g] { wnorm(&|i| xc[(i, g + 1)] - xc[(i, g)]) } else { T::zero() })
            .collect();

        let gram = use_gram.then(|| {
            let mut b = xc.clone();
            let sw: Vec<T> = w.iter().map(|&x| x.sqrt()).collect();
            for mut col in b.column_iter_mut() {
                col.iter_mut().zip(&sw).for_each(|(v, &s)| *v *= s);
            }
            let bt = b.transpose();
            bt * b
        });

        let held: Vec<usize> = frozen
            .map(|lib| (0..lib.n_pieces()).filter(|&k| lib.is_frozen(k)).collect())
            .unwrap_or_default();
        let mut fc = DMatrix::zeros(dim, held.len());
        if let Some(lib) = frozen {
            for (z, &k) in held.iter().enumerate() {
                for i in 0..dim {
                    fc[(i, z)] = lib.pieces[(i, k)] - mean[i];
                }
            }
        }
        let wfc = weighted(&fc, &w);
        let h = (wfc.transpose() * &xc).transpose();
        let j = wfc.transpose() * &fc;
        Self { n, diff, active, w, mean, xc, xx, dxx, gram, held, fc, h, j }
    }

    pub fn n_held(&self) -> usize {
        self.held.len()
    }

    /// Piece `k` of a `d`-piece library: held pieces map to their `Q` row.
    pub fn held_slot(&self, k: usize) -> Option<usize> {
        self.held.iter().position(|&h| h == k)
    }

    fn explicit_centered(&self, model: &Model<T>) -> DMatrix<T> {
        let d = model.p.ncols();
        let mut r = DMatrix::zeros(self.xc.nrows(), d);
        if model.p.iter().any(|&v| v != T::zero()) {
            r.gemm(T::one(), &self.xc, &model.p, T::zero());
        }
        if self.n_held() > 0 {
            r.gemm(T::one(), &self.fc, &model.q, T::one());
        }
        r
    }

    pub fn cross(&self, model: &Model<T>) -> Cross<T> {
        match &self.gram {
            Some(k) => {
                let mut c = k * &model.p;
                if self.n_held() > 0 {
                    c.gemm(T::one(), &self.h, &model.q, T::one());
                }
                let mut nn = model.p.transpose() * &c;
                if self.n_held() > 0 {
                    let mut inner = self.h.transpose() * &model.p;
                    inner.gemm(T::one(), &self.j, &model.q, T::one());
                    nn.gemm(T::one(), &model.q.transpose(), &inner, T::one());
                }
                Cross { c, nn }
            }
            None => {
                let r = self.explicit_centered(model);
                let wr = weighted(&r, &self.w);
                let wrt = wr.transpose();
                let c = (&wrt * &self.xc).transpose();
                let nn = &wrt * &r;
                Cross { c, nn }
            }
        }
    }

    /// Uncentered pieces; held pieces are reconstructed, not copied.
    pub fn materialize(&self, model: &Model<T>) -> DMatrix<T> {
        let mut r = self.explicit_centered(model);
        for mut col in r.column_iter_mut() {
            col.iter_mut().zip(&self.mean).for_each(|(v, &m)| *v += m);
        }
        r
    }

    /// Model whose pieces are the given frames.
    pub fn frames_model(&self, frames: &[usize]) -> Model<T> {
        let mut p = DMatrix::zeros(self.n, frames.len());
        for (k, &f) in frames.iter().enumerate() {
            p[(f, k)] = T::one();
        }
        Model { p, q: DMatrix::zeros(self.n_held(), frames.len()) }
    }
}

fn weighted<T: Real>(m: &DMatrix<T>, w: &[T]) -> DMatrix<T> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col.iter_mut().zip(w).for_each(|(v, &wi)| *v *= wi);
    }
    out
}

impl<T: Real> Cross<T> {
    pub fn n_pieces(&self) -> usize {
        self.nn.nrows()
    }

    #[inline]
    pub fn unary(&self, prep: &Prepared<T>, f: usize, k: usize) -> T {
        T::lit(0.5) * (prep.xx[f] - T::lit(2.0) * self.c[(f, k)] + self.nn[(k, k)])
    }

    /// Velocity mismatch of pair `(g, g + 1)` labeled `(a, b)`, without `lambda`.
    #[inline]
    pub fn binary(&self, prep: &Prepared<T>, g: usize, a: usize, b: usize) -> T {
        let two = T::lit(2.0);
        let inner = self.c[(g + 1, b)] - self.c[(g, b)] - self.c[(g + 1, a)] + self.c[(g, a)];
        let dd = self.nn[(a, a)] + self.nn[(b, b)] - two * self.nn[(a, b)];
        T::lit(0.5) * (prep.dxx[g] - two * inner + dd)
    }

    pub fn energy(&self, prep: &Prepared<T>, labels: &[usize], lambda: T) -> T {
        let mut e = T::zero();
        for (f, &l) in labels.iter().enumerate() {
            e += self.unary(prep, f, l);
        }
        if lambda > T::zero() {
            for g in 0..prep.active.len() {
                if prep.active[g] {
                    e += lambda * self.binary(prep, g, labels[g], labels[g + 1]);
                }
            }
        }
        e
    }

    /// Unary plus both incident binary terms, per frame.
    pub fn frame_errors(&self, prep: &Prepared<T>, labels: &[usize], lambda: T) -> Vec<T> {
        let mut out: Vec<T> = labels.iter().enumerate().map(|(f, &l)| self.unary(prep, f, l)).collect();
        if lambda > T::zero() {
            for g in 0..prep.active.len() {
                if prep.active[g] {
                    let b = lambda * self.binary(prep, g, labels[g], labels[g + 1]);
                    out[g] += b;
                    out[g + 1] += b;
                }
            }
        }
        out
    }
}
