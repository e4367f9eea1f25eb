use nalgebra::DMatrix;

use crate::error::Result;
use crate::scalar::Real;

use super::prepared::{Cross, Model, Prepared};
use super::{check_lambda, Assignment, PartAnim, ReplacementLibrary, SaliencyWeights};

/// Exact minimizer of unary plus consecutive-pair binary terms (Viterbi).
///
/// Ties resolve to the lowest piece index, both for predecessors and for the
/// final frame.
pub(crate) fn chain_dp<T: Real>(cross: &Cross<T>, prep: &Prepared<T>, lambda: T) -> Vec<usize> {
    let n = prep.n;
    let d = cross.n_pieces();
    let mut back = vec![0usize; n * d];
    let mut cost: Vec<T> = (0..d).map(|k| cross.unary(prep, 0, k)).collect();
    let mut next = vec![T::zero(); d];
    for f in 1..n {
        let g = f - 1;
        if lambda > T::zero() && prep.active[g] {
            for b in 0..d {
                let mut best = cost[0] + lambda * cross.binary(prep, g, 0, b);
                let mut arg = 0;
                for (a, &ca) in cost.iter().enumerate().skip(1) {
                    let v = ca + lambda * cross.binary(prep, g, a, b);
                    if v < best {
                        best = v;
                        arg = a;
                    }
                }
                back[f * d + b] = arg;
                next[b] = best + cross.unary(prep, f, b);
            }
        } else {
            let arg = argmin(&cost);
            let best = cost[arg];
            for b in 0..d {
                back[f * d + b] = arg;
                next[b] = best + cross.unary(prep, f, b);
            }
        }
        std::mem::swap(&mut cost, &mut next);
    }
    let mut labels = vec![0; n];
    labels[n - 1] = argmin(&cost);
    for f in (1..n).rev() {
        labels[f - 1] = back[f * d + labels[f]];
    }
    labels
}

fn argmin<T: Real>(v: &[T]) -> usize {
    let mut arg = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[arg] {
            arg = i;
        }
    }
    arg
}

/// Globally optimal labeling of the frames against a fixed library.
pub fn assign_labels<T: Real>(
    part: &PartAnim<T>,
    library: &ReplacementLibrary<T>,
    lambda: T,
    weights: &SaliencyWeights<T>,
) -> Result<Assignment> {
    check_lambda(lambda)?;
    library.check(part)?;
    weights.check(part)?;
    let d = library.n_pieces();
    let all = ReplacementLibrary::fixed(library.pieces.clone())?;
    let prep = Prepared::new(part, weights, Some(&all), false);
    let model = Model { p: DMatrix::zeros(part.n_frames(), d), q: DMatrix::identity(d, d) };
    let cross = prep.cross(&model);
    Ok(Assignment::new(chain_dp(&cross, &prep, lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anim::Anim;
    use crate::library::total_energy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_labelings(n: usize, d: usize) -> impl Iterator<Item = Vec<usize>> {
        (0..d.pow(n as u32)).map(move |mut code| {
            (0..n)
                .map(|_| {
                    let l = code % d;
                    code /= d;
                    l
                })
                .collect()
        })
    }

    #[test]
    fn dp_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..60 {
            let n = 2 + trial % 7;
            let d = 1 + trial % 3;
            let m = 3;
            let frames = (0..n)
                .map(|_| (0..m).map(|_| [rng.random(), rng.random(), rng.random()]).collect())
                .collect();
            let mut cuts = vec![false; n];
            if trial % 4 == 0 {
                cuts[n - 1] = true;
            }
            let part = PartAnim::whole(Anim::new(frames, vec![[0, 1, 2]], cuts).unwrap());
            let lib = ReplacementLibrary::fixed(DMatrix::from_fn(3 * m, d, |_, _| rng.random())).unwrap();
            let w = SaliencyWeights::new((0..m).map(|_| rng.random::<f64>() + 0.1).collect()).unwrap();
            let lambda = [0.0, 0.5, 2.0][trial % 3];
            let got = assign_labels(&part, &lib, lambda, &w).unwrap();
            let e = total_energy(&part, &lib, &got, lambda, &w).unwrap();
            let best = all_labelings(n, d)
                .map(|l| total_energy(&part, &lib, &Assignment::new(l), lambda, &w).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(e <= best * (1.0 + 1e-12) + 1e-300, "trial {trial}: {e} > {best}");
        }
    }

    #[test]
    fn zero_lambda_picks_nearest_lowest_index() {
        let frames: Vec<Vec<[f64; 3]>> = vec![
            vec![[0.0, 0.0, 0.0]; 3],
            vec![[1.0, 0.0, 0.0]; 3],
            vec![[0.5, 0.0, 0.0]; 3],
        ];
        let part = PartAnim::whole(Anim::new(frames, vec![[0, 1, 2]], vec![false; 3]).unwrap());
        let lib = ReplacementLibrary::from_fields(&[vec![[0.0, 0.0, 0.0]; 3], vec![[1.0, 0.0, 0.0]; 3]], vec![true; 2])
            .unwrap();
        let a = assign_labels(&part, &lib, 0.0, &SaliencyWeights::uniform(3)).unwrap();
        assert_eq!(a.labels, vec![0, 1, 0]);
    }
}
