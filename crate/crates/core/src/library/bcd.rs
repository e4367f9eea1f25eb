use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::assign::chain_dp;
use super::prepared::{Cross, Model, Prepared, GRAM_MAX_FRAMES};
use super::update::LibrarySystem;
use super::{
    assign_labels, total_energy, Assignment, OptimConfig, PartAnim, ReplacementLibrary, SaliencyWeights,
};

/// One update + assign round.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    /// Labels after the assignment step.
    pub labels: Vec<usize>,
    pub energy_after_update: T,
    pub energy_after_assign: T,
    /// Pieces reseeded at a worst-fit frame before the update.
    pub repaired: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartRun<T> {
    pub initial_labels: Vec<usize>,
    /// Energy of the starting library and labels, when started from a library.
    pub initial_energy: Option<T>,
    pub iterations: Vec<IterationRecord<T>>,
    pub energy: T,
    /// Stopped on unchanged labels or relative tolerance rather than the iteration cap.
    pub converged: bool,
}

impl<T: Real> RestartRun<T> {
    /// Energies in half-step order.
    pub fn energy_trace(&self) -> Vec<T> {
        let mut out: Vec<T> = self.initial_energy.into_iter().collect();
        for it in &self.iterations {
            out.push(it.energy_after_update);
            out.push(it.energy_after_assign);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult<T: Real> {
    pub library: ReplacementLibrary<T>,
    pub assignment: Assignment,
    /// `E(R, l)` of the returned pair.
    pub energy: T,
    pub best_restart: usize,
    pub runs: Vec<RestartRun<T>>,
}

/// Generator for restart `restart` of a run seeded with `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Random labeling using every one of the `d` pieces.
///
/// Frames are shuffled; the first `d` take pieces `0..d` and the rest are
/// drawn uniformly.
pub fn initial_assignment<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (i, &f) in order.iter().enumerate() {
        labels[f] = if i < d { i } else { rng.random_range(0..d) };
    }
    labels
}

pub(crate) enum Start<T: Real> {
    Labels(Vec<usize>),
    Model(Model<T>),
}

pub(crate) struct RunState<T: Real> {
    pub model: Model<T>,
    pub cross: Cross<T>,
    pub labels: Vec<usize>,
    pub run: RestartRun<T>,
}

pub(crate) struct Problem<'a, T: Real> {
    pub prep: &'a Prepared<T>,
    pub d: usize,
    pub lambda: T,
    /// Per library piece.
    pub frozen: Vec<bool>,
}

impl<T: Real> Problem<'_, T> {
    fn update(&self, labels: &[usize], keep: &[usize], prev: Option<&Model<T>>) -> Result<Model<T>> {
        let (n, d) = (self.prep.n, self.d);
        let mut held = self.frozen.clone();
        for &k in keep {
            held[k] = true;
        }
        let sys = LibrarySystem::new(labels, d, self.lambda, &self.prep.diff, &held)?;
        let coeff = sys.frame_coefficients();
        let nz = self.prep.n_held();
        let mut p = DMatrix::zeros(n, d);
        let mut q = DMatrix::zeros(nz, d);
        for &k in &sys.held {
            if let Some(z) = self.prep.held_slot(k) {
                q[(z, k)] = T::one();
            } else {
                let prev = prev.expect("kept pieces need a previous model");
                p.set_column(k, &prev.p.column(k));
                q.set_column(k, &prev.q.column(k));
            }
        }
        for (j, &k) in sys.free.iter().enumerate() {
            let mut pc = coeff.column(j).into_owned();
            let mut qc = nalgebra::DVector::zeros(nz);
            for (h, &kh) in sys.held.iter().enumerate() {
                let t = sys.transfer[(h, j)];
                if t != T::zero() {
                    pc.axpy(t, &p.column(kh), T::one());
                    qc.axpy(t, &q.column(kh), T::one());
                }
            }
            p.set_column(k, &pc);
            q.set_column(k, &qc);
        }
        Ok(Model { p, q })
    }

    /// Moves the worst-fit frames onto unused free pieces.
    fn repair(&self, labels: &[usize], cross: &Cross<T>) -> (Vec<usize>, Vec<usize>) {
        let mut counts = vec![0usize; self.d];
        for &l in labels {
            counts[l] += 1;
        }
        let empty: Vec<usize> = (0..self.d).filter(|&k| counts[k] == 0 && !self.frozen[k]).collect();
        if empty.is_empty() {
            return (labels.to_vec(), empty);
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let u: Vec<T> = labels.iter().enumerate().map(|(f, &l)| cross.unary(self.prep, f, l)).collect();
        order.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut out = labels.to_vec();
        let mut moved = vec![false; labels.len()];
        let mut cursor = 0;
        for &k in &empty {
            while cursor < order.len() {
                let f = order[cursor];
                cursor += 1;
                let l = out[f];
                if !moved[f] && (counts[l] >= 2 || self.frozen[l]) {
                    counts[l] -= 1;
                    counts[k] += 1;
                    out[f] = k;
                    moved[f] = true;
                    break;
                }
            }
        }
        (out, empty)
    }

    pub fn run(&self, start: Start<T>, config: &OptimConfig<T>) -> Result<RunState<T>> {
        let prep = self.prep;
        let (mut labels, mut current, initial_energy) = match start {
            Start::Labels(l) => (l, None, None),
            Start::Model(model) => {
                let cross = prep.cross(&model);
                let labels = chain_dp(&cross, prep, self.lambda);
                let e = cross.energy(prep, &labels, self.lambda);
                (labels, Some((model, cross)), Some(e))
            }
        };
        let mut run = RestartRun {
            initial_labels: labels.clone(),
            initial_energy,
            iterations: Vec::new(),
            energy: T::INFINITY,
            converged: false,
        };
        let mut prev_energy = initial_energy;
        let slack = T::lit(1e-12);
        for _ in 0..config.max_iters.max(1) {
            let (model, used, repaired) = match &current {
                Some((old_model, old_cross)) => {
                    let (relabeled, empty) = self.repair(&labels, old_cross);
                    if empty.is_empty() {
                        (self.update(&labels, &[], None)?, labels.clone(), empty)
                    } else {
                        let cand = self.update(&relabeled, &[], None)?;
                        let e_cand = prep.cross(&cand).energy(prep, &relabeled, self.lambda);
                        let e_prev = prev_energy.unwrap_or(T::INFINITY);
                        if e_cand <= e_prev + slack * e_prev.abs() {
                            (cand, relabeled, empty)
                        } else {
                            (self.update(&labels, &empty, Some(old_model))?, labels.clone(), Vec::new())
                        }
                    }
                }
                None => (self.update(&labels, &[], None)?, labels.clone(), Vec::new()),
            };
            let cross = prep.cross(&model);
            let e_update = cross.energy(prep, &used, self.lambda);
            let next = chain_dp(&cross, prep, self.lambda);
            let e_assign = cross.energy(prep, &next, self.lambda);
            run.iterations.push(IterationRecord {
                labels: next.clone(),
                energy_after_update: e_update,
                energy_after_assign: e_assign,
                repaired,
            });
            let unchanged = next == used;
            let stalled = prev_energy.is_some_and(|ep| ep - e_assign <= config.rel_tol * ep.abs());
            prev_energy = Some(e_assign);
            labels = next;
            current = Some((model, cross));
            if unchanged || stalled {
                run.converged = true;
                break;
            }
        }
        let (model, cross) = current.expect("at least one iteration ran");
        run.energy = prev_energy.expect("at least one iteration ran");
        Ok(RunState { model, cross, labels, run })
    }
}

/// Best of the random restarts plus an optional warm start (run last).
pub(crate) fn best_of_restarts<T: Real>(
    problem: &Problem<'_, T>,
    config: &OptimConfig<T>,
    warm: Option<Model<T>>,
) -> Result<(RunState<T>, Vec<RestartRun<T>>, usize)> {
    let n = problem.prep.n;
    let mut states: Vec<RunState<T>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(config.seed, r);
            problem.run(Start::Labels(initial_assignment(n, problem.d, &mut rng)), config)
        })
        .collect::<Result<_>>()?;
    if let Some(model) = warm {
        states.push(problem.run(Start::Model(model), config)?);
    }
    let mut best = 0;
    for (i, s) in states.iter().enumerate() {
        if s.run.energy < states[best].run.energy {
            best = i;
        }
    }
    let runs = states.iter().map(|s| s.run.clone()).collect();
    let state = states.swap_remove(best);
    Ok((state, runs, best))
}

pub(crate) fn finish<T: Real>(
    part: &PartAnim<T>,
    prep: &Prepared<T>,
    state: &RunState<T>,
    fixed: Option<&ReplacementLibrary<T>>,
    lambda: T,
    weights: &SaliencyWeights<T>,
) -> Result<(ReplacementLibrary<T>, Assignment, T)> {
    let mut pieces = prep.materialize(&state.model);
    let frozen = match fixed {
        Some(lib) => {
            for k in 0..lib.n_pieces() {
                if lib.is_frozen(k) {
                    pieces.set_column(k, &lib.pieces.column(k));
                }
            }
            lib.frozen.clone()
        }
        None => vec![false; pieces.ncols()],
    };
    let library = ReplacementLibrary::new(pieces, frozen)?;
    let assignment = Assignment::new(state.labels.clone());
    let energy = total_energy(part, &library, &assignment, lambda, weights)?;
    Ok((library, assignment, energy))
}

pub(crate) fn validate<T: Real>(
    part: &PartAnim<T>,
    d: usize,
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
    fixed: Option<&ReplacementLibrary<T>>,
) -> Result<()> {
    config.check()?;
    weights.check(part)?;
    let n = part.n_frames();
    if d == 0 || d > n {
        return Err(Error::InvalidLibrarySize { d, n });
    }
    if let Some(lib) = fixed {
        lib.check(part)?;
        if lib.n_pieces() != d {
            return Err(Error::Dimension(format!("fixed library has {} pieces, expected {d}", lib.n_pieces())));
        }
    }
    Ok(())
}

/// Library of `d` pieces and labeling by block coordinate descent.
///
/// Each restart alternates the exact library update and the exact chain
/// labeling until the labels repeat, the relative decrease falls below
/// `rel_tol`, or `max_iters` rounds. The lowest-energy restart is returned.
/// A fully frozen `fixed` library reduces to one labeling step.
pub fn bcd_optimize<T: Real>(
    part: &PartAnim<T>,
    d: usize,
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
    fixed: Option<&ReplacementLibrary<T>>,
) -> Result<OptimResult<T>> {
    validate(part, d, weights, config, fixed)?;
    let n = part.n_frames();
    if let Some(lib) = fixed.filter(|l| l.all_frozen()) {
        let assignment = assign_labels(part, lib, config.lambda, weights)?;
        let energy = total_energy(part, lib, &assignment, config.lambda, weights)?;
        return Ok(OptimResult { library: lib.clone(), assignment, energy, best_restart: 0, runs: Vec::new() });
    }
    if d == n && fixed.is_none() {
        let library = ReplacementLibrary::new(part.matrix().into_owned(), vec![false; n])?;
        let assignment = Assignment::new((0..n).collect());
        let energy = total_energy(part, &library, &assignment, config.lambda, weights)?;
        return Ok(OptimResult { library, assignment, energy, best_restart: 0, runs: Vec::new() });
    }
    let prep = Prepared::new(part, weights, fixed, n <= GRAM_MAX_FRAMES);
    let frozen = fixed.map_or_else(|| vec![false; d], |l| l.frozen.clone());
    let problem = Problem { prep: &prep, d, lambda: config.lambda, frozen };
    let (state, runs, best_restart) = best_of_restarts(&problem, config, None)?;
    let (library, assignment, energy) = finish(part, &prep, &state, fixed, config.lambda, weights)?;
    Ok(OptimResult { library, assignment, energy, best_restart, runs })
}
