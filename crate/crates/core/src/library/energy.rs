use crate::error::Result;
use crate::scalar::Real;

use super::{check_lambda, Assignment, PartAnim, ReplacementLibrary, SaliencyWeights};

/// Position and velocity parts of the energy, without the `lambda` factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyTerms<T> {
    /// `1/2 |X - R S|_W^2`
    pub position: T,
    /// `1/2 |(X - R S) G|_W^2`
    pub velocity: T,
}

impl<T: Real> EnergyTerms<T> {
    pub fn total(&self, lambda: T) -> T {
        self.position + lambda * self.velocity
    }
}

/// Per-frame split of [`EnergyTerms`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameError<T> {
    /// `1/2 |x_f - d_l(f)|_W^2`
    pub position: T,
    /// Velocity mismatch of the pair `(f - 1, f)`; zero at frame 0 and across cuts.
    pub velocity: T,
}

/// Unary plus both incident binary terms of frame `f`.
pub fn incident_frame_error<T: Real>(errors: &[FrameError<T>], f: usize, lambda: T) -> T {
    let next = errors.get(f + 1).map_or(T::zero(), |e| e.velocity);
    errors[f].position + lambda * (errors[f].velocity + next)
}

fn weighted_sq<T: Real>(w: &[T], mut diff: impl FnMut(usize) -> T) -> T {
    let mut s = T::zero();
    for (i, &wi) in w.iter().enumerate() {
        let e = diff(i);
        s += wi * e * e;
    }
    s * T::lit(0.5)
}

pub fn frame_errors<T: Real>(
    part: &PartAnim<T>,
    library: &ReplacementLibrary<T>,
    assignment: &Assignment,
    weights: &SaliencyWeights<T>,
) -> Result<Vec<FrameError<T>>> {
    library.check(part)?;
    weights.check(part)?;
    assignment.check(part.n_frames(), library.n_pieces())?;
    let w = weights.coordinate_weights();
    let diff = part.diff();
    let l = &assignment.labels;
    let piece = |k: usize| library.pieces.column(k);
    let mut out = Vec::with_capacity(part.n_frames());
    for f in 0..part.n_frames() {
        let x = part.frame_coords(f);
        let d = piece(l[f]);
        let position = weighted_sq(&w, |i| x[i] - d[i]);
        let velocity = if f > 0 && diff.is_active(f - 1) {
            let xp = part.frame_coords(f - 1);
            let dp = piece(l[f - 1]);
            weighted_sq(&w, |i| (x[i] - xp[i]) - (d[i] - dp[i]))
        } else {
            T::zero()
        };
        out.push(FrameError { position, velocity });
    }
    Ok(out)
}

pub fn energy_terms<T: Real>(
    part: &PartAnim<T>,
    library: &ReplacementLibrary<T>,
    assignment: &Assignment,
    weights: &SaliencyWeights<T>,
) -> Result<EnergyTerms<T>> {
    let errs = frame_errors(part, library, assignment, weights)?;
    let mut terms = EnergyTerms { position: T::zero(), velocity: T::zero() };
    for e in errs {
        terms.position += e.position;
        terms.velocity += e.velocity;
    }
    Ok(terms)
}

/// `E(R, l)` as the sum of per-frame unary and consecutive-pair binary terms.
pub fn total_energy<T: Real>(
    part: &PartAnim<T>,
    library: &ReplacementLibrary<T>,
    assignment: &Assignment,
    lambda: T,
    weights: &SaliencyWeights<T>,
) -> Result<T> {
    check_lambda(lambda)?;
    Ok(energy_terms(part, library, assignment, weights)?.total(lambda))
}
