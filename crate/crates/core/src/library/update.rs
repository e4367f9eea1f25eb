use nalgebra::{Cholesky, DMatrix, DMatrixView, Dyn};

use crate::anim::DiffOperator;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{check_lambda, Assignment, PartAnim, ReplacementLibrary};

enum Factor<T: Real> {
    Diagonal(Vec<T>),
    Cholesky(Cholesky<T, Dyn>),
}

impl<T: Real> Factor<T> {
    /// `M A^-1` for symmetric `A`.
    fn solve_right(&self, m: DMatrix<T>) -> DMatrix<T> {
        match self {
            Factor::Diagonal(a) => {
                let mut m = m;
                for (j, &ajj) in a.iter().enumerate() {
                    m.column_mut(j).iter_mut().for_each(|x| *x /= ajj);
                }
                m
            }
            Factor::Cholesky(c) => c.solve(&m.transpose()).transpose(),
        }
    }
}

/// Normal equations of the library update for a fixed labeling.
///
/// With `Phi = I + lambda G G^T`, stationarity in `R` gives
/// `R A = X Phi S^T` with `A = S Phi S^T`. Held pieces (frozen, or unused
/// pieces kept at their previous geometry) move to the right-hand side:
/// `R_a = X Y_a A_aa^-1 + R_h T`, `Y = Phi S^T`, `T = -A_ha A_aa^-1`.
pub(crate) struct LibrarySystem<T: Real> {
    pub free: Vec<usize>,
    pub held: Vec<usize>,
    /// Nonzeros of row `f` of `Y_a` as `(free slot, value)`.
    y_rows: Vec<Vec<(usize, T)>>,
    factor: Factor<T>,
    /// `T`, `held x free`.
    pub transfer: DMatrix<T>,
}

impl<T: Real> LibrarySystem<T> {
    pub fn new(labels: &[usize], d: usize, lambda: T, diff: &DiffOperator, held: &[bool]) -> Result<Self> {
        let n = labels.len();
        let mut a = DMatrix::<T>::zeros(d, d);
        let mut y: Vec<Vec<(usize, T)>> = labels.iter().map(|&l| vec![(l, T::one())]).collect();
        for &l in labels {
            a[(l, l)] += T::one();
        }
        if lambda > T::zero() {
            for g in diff.active_columns() {
                let (p, q) = (labels[g], labels[g + 1]);
                if p == q {
                    continue;
                }
                a[(p, p)] += lambda;
                a[(q, q)] += lambda;
                a[(p, q)] -= lambda;
                a[(q, p)] -= lambda;
                y[g + 1].push((q, lambda));
                y[g].push((q, -lambda));
                y[g + 1].push((p, -lambda));
                y[g].push((p, lambda));
            }
        }
        let mut free = Vec::new();
        let mut held_idx = Vec::new();
        for k in 0..d {
            if held[k] {
                held_idx.push(k);
            } else if a[(k, k)] == T::zero() {
                return Err(Error::EmptyPiece(k));
            } else {
                free.push(k);
            }
        }
        let mut slot = vec![usize::MAX; d];
        for (j, &k) in free.iter().enumerate() {
            slot[k] = j;
        }
        let y_rows = y
            .into_iter()
            .map(|row| {
                let mut out: Vec<(usize, T)> = Vec::with_capacity(row.len());
                for (k, v) in row {
                    if slot[k] == usize::MAX {
                        continue;
                    }
                    match out.iter_mut().find(|(j, _)| *j == slot[k]) {
                        Some(e) => e.1 += v,
                        None => out.push((slot[k], v)),
                    }
                }
                out
            })
            .collect::<Vec<_>>();
        debug_assert_eq!(y_rows.len(), n);

        let na = free.len();
        let a_ff = DMatrix::from_fn(na, na, |i, j| a[(free[i], free[j])]);
        let diagonal = (0..na).all(|i| (0..na).all(|j| i == j || a_ff[(i, j)] == T::zero()));
        let factor = if diagonal {
            Factor::Diagonal((0..na).map(|i| a_ff[(i, i)]).collect())
        } else {
            Factor::Cholesky(
                Cholesky::new(a_ff).ok_or_else(|| Error::SolveFailure("library system not positive definite".into()))?,
            )
        };
        let a_hf = DMatrix::from_fn(held_idx.len(), na, |i, j| -a[(held_idx[i], free[j])]);
        let transfer = if held_idx.is_empty() { a_hf } else { factor.solve_right(a_hf) };
        Ok(Self { free, held: held_idx, y_rows, factor, transfer })
    }

    /// `Y_a A_aa^-1`, `n x free`.
    pub fn frame_coefficients(&self) -> DMatrix<T> {
        let mut y = DMatrix::zeros(self.y_rows.len(), self.free.len());
        for (f, row) in self.y_rows.iter().enumerate() {
            for &(j, v) in row {
                y[(f, j)] += v;
            }
        }
        self.factor.solve_right(y)
    }

    /// Free pieces `R_a` from frames `X` (`3m x n`) and the held pieces of `library`.
    pub fn solve_explicit(&self, x: DMatrixView<'_, T>, library: Option<&DMatrix<T>>) -> DMatrix<T> {
        let mut rhs = DMatrix::<T>::zeros(x.nrows(), self.free.len());
        for (f, row) in self.y_rows.iter().enumerate() {
            let xf = x.column(f);
            for &(j, v) in row {
                rhs.column_mut(j).axpy(v, &xf, T::one());
            }
        }
        let mut r = self.factor.solve_right(rhs);
        if let Some(lib) = library {
            for (h, &k) in self.held.iter().enumerate() {
                for j in 0..self.free.len() {
                    let t = self.transfer[(h, j)];
                    if t != T::zero() {
                        r.column_mut(j).axpy(t, &lib.column(k), T::one());
                    }
                }
            }
        }
        r
    }
}

/// Optimal library for a fixed labeling.
///
/// With `fixed`, its frozen pieces are copied unchanged and the remaining
/// pieces are solved for; `d` must then equal its piece count.
pub fn update_library<T: Real>(
    part: &PartAnim<T>,
    assignment: &Assignment,
    d: usize,
    lambda: T,
    fixed: Option<&ReplacementLibrary<T>>,
) -> Result<ReplacementLibrary<T>> {
    check_lambda(lambda)?;
    assignment.check(part.n_frames(), d)?;
    let frozen = match fixed {
        Some(lib) => {
            lib.check(part)?;
            if lib.n_pieces() != d {
                return Err(Error::Dimension(format!("fixed library has {} pieces, expected {d}", lib.n_pieces())));
            }
            lib.frozen.clone()
        }
        None => vec![false; d],
    };
    let sys = LibrarySystem::new(&assignment.labels, d, lambda, &part.diff(), &frozen)?;
    let solved = sys.solve_explicit(part.matrix(), fixed.map(|l| &l.pieces));
    let mut pieces = match fixed {
        Some(lib) => lib.pieces.clone(),
        None => DMatrix::zeros(part.dim(), d),
    };
    for (j, &k) in sys.free.iter().enumerate() {
        pieces.set_column(k, &solved.column(j));
    }
    ReplacementLibrary::new(pieces, frozen)
}
