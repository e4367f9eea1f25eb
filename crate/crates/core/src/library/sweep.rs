use crate::anim::Anim;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::bcd::{best_of_restarts, finish, validate, Problem, RunState};
use super::prepared::{Model, Prepared, GRAM_MAX_FRAMES};
use super::{
    energy_terms, frame_errors, incident_frame_error, Assignment, OptimConfig, OptimResult, PartAnim,
    ReplacementLibrary, SaliencyWeights,
};

#[derive(Clone, Debug)]
pub struct SweepPoint<T: Real> {
    pub d: usize,
    pub energy: T,
    /// Largest per-frame unary plus incident binary error.
    pub max_frame_error: T,
    pub result: OptimResult<T>,
}

#[derive(Clone, Debug)]
pub struct LambdaPoint<T: Real> {
    pub lambda: T,
    /// `1/2 |X - R S|_W^2`
    pub position: T,
    /// `1/2 |(X - R S) G|_W^2`
    pub velocity: T,
    /// Index of the lambda whose optimization produced this pair.
    pub source: usize,
    pub library: ReplacementLibrary<T>,
    pub assignment: Assignment,
}

/// Fixed library of `d` frames sampled uniformly over time.
pub fn uniform_sampling_library<T: Real>(part: &PartAnim<T>, d: usize) -> Result<ReplacementLibrary<T>> {
    let n = part.n_frames();
    if d == 0 || d > n {
        return Err(Error::InvalidLibrarySize { d, n });
    }
    let x = part.matrix();
    let cols: Vec<usize> = (0..d).map(|k| (2 * k + 1) * n / (2 * d)).collect();
    ReplacementLibrary::fixed(x.select_columns(cols.iter()))
}

fn max_frame_error<T: Real>(
    part: &PartAnim<T>,
    library: &ReplacementLibrary<T>,
    assignment: &Assignment,
    lambda: T,
    weights: &SaliencyWeights<T>,
) -> Result<T> {
    let errs = frame_errors(part, library, assignment, weights)?;
    Ok((0..errs.len()).map(|f| incident_frame_error(&errs, f, lambda)).fold(T::zero(), |a, b| a.max(b)))
}

/// Incremental optimizer over growing library sizes on one part.
struct Grower<'a, T: Real> {
    part: &'a PartAnim<T>,
    prep: Prepared<T>,
    weights: &'a SaliencyWeights<T>,
    config: &'a OptimConfig<T>,
    prev: Option<(usize, RunState<T>)>,
    /// Warm start for the first step, used when its size matches.
    carry: Option<Model<T>>,
}

impl<'a, T: Real> Grower<'a, T> {
    fn new(part: &'a PartAnim<T>, weights: &'a SaliencyWeights<T>, config: &'a OptimConfig<T>) -> Self {
        let prep = Prepared::new(part, weights, None, part.n_frames() <= GRAM_MAX_FRAMES);
        Self { part, prep, weights, config, prev: None, carry: None }
    }

    /// Previous best library plus the worst-fit frames as new pieces.
    fn warm_model(&self, d: usize) -> Option<Model<T>> {
        let (d_prev, state) = self.prev.as_ref()?;
        let errs = state.cross.frame_errors(&self.prep, &state.labels, self.config.lambda);
        let mut order: Vec<usize> = (0..errs.len()).collect();
        order.sort_by(|&a, &b| errs[b].partial_cmp(&errs[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let added = self.prep.frames_model(&order[..d - d_prev]);
        let n = self.prep.n;
        let mut p = nalgebra::DMatrix::zeros(n, d);
        p.columns_mut(0, *d_prev).copy_from(&state.model.p);
        p.columns_mut(*d_prev, d - d_prev).copy_from(&added.p);
        Some(Model { p, q: nalgebra::DMatrix::zeros(0, d) })
    }

    fn step(&mut self, d: usize) -> Result<SweepPoint<T>> {
        let (part, config, weights) = (self.part, self.config, self.weights);
        validate(part, d, weights, config, None)?;
        let n = part.n_frames();
        if d == n {
            let state_model = self.prep.frames_model(&(0..n).collect::<Vec<_>>());
            let cross = self.prep.cross(&state_model);
            let labels: Vec<usize> = (0..n).collect();
            let library = ReplacementLibrary::new(part.matrix().into_owned(), vec![false; n])?;
            let assignment = Assignment::new(labels.clone());
            let energy = super::total_energy(part, &library, &assignment, config.lambda, weights)?;
            let max_err = max_frame_error(part, &library, &assignment, config.lambda, weights)?;
            let run = super::RestartRun {
                initial_labels: labels.clone(),
                initial_energy: None,
                iterations: Vec::new(),
                energy,
                converged: true,
            };
            self.prev = Some((d, RunState { model: state_model, cross, labels, run }));
            let result = OptimResult { library, assignment, energy, best_restart: 0, runs: Vec::new() };
            return Ok(SweepPoint { d, energy, max_frame_error: max_err, result });
        }
        let warm = match self.carry.take() {
            Some(m) if m.p.ncols() == d => Some(m),
            _ => self.warm_model(d),
        };
        let problem = Problem { prep: &self.prep, d, lambda: config.lambda, frozen: vec![false; d] };
        let (state, runs, best_restart) = best_of_restarts(&problem, config, warm)?;
        let (library, assignment, energy) = finish(part, &self.prep, &state, None, config.lambda, weights)?;
        let max_err = max_frame_error(part, &library, &assignment, config.lambda, weights)?;
        self.prev = Some((d, state));
        let result = OptimResult { library, assignment, energy, best_restart, runs };
        Ok(SweepPoint { d, energy, max_frame_error: max_err, result })
    }
}

/// Optimizes every library size in `sizes` (ascending, deduplicated).
///
/// Each size after the first also runs one warm start from the previous
/// best library plus its worst-fit frames, so the best energy never
/// increases with `d`.
pub fn sweep_library_size<T: Real>(
    part: &PartAnim<T>,
    sizes: &[usize],
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
) -> Result<Vec<SweepPoint<T>>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("no library sizes given".into()));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let mut grower = Grower::new(part, weights, config);
    sizes.into_iter().map(|d| grower.step(d)).collect()
}

fn check_cap<T: Real>(cap: T) -> Result<()> {
    if !(cap > T::zero()) || !cap.is_finite_value() {
        return Err(Error::InvalidConfig("error cap must be positive".into()));
    }
    Ok(())
}

fn cap_search<T: Real>(
    part: &PartAnim<T>,
    cap: T,
    start: usize,
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
    carry: Option<Model<T>>,
) -> Result<(SweepPoint<T>, Model<T>)> {
    let mut grower = Grower::new(part, weights, config);
    grower.carry = carry;
    for d in start.max(1)..=part.n_frames() {
        let point = grower.step(d)?;
        if point.max_frame_error <= cap {
            let (_, state) = grower.prev.take().expect("step records its state");
            return Ok((point, state.model));
        }
    }
    Err(Error::CapUnreachable(cap.to_f64_lossy()))
}

/// Smallest library whose worst frame error is at most `cap`.
pub fn min_library_for_cap<T: Real>(
    part: &PartAnim<T>,
    cap: T,
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
) -> Result<SweepPoint<T>> {
    check_cap(cap)?;
    cap_search(part, cap, 1, weights, config, None).map(|(p, _)| p)
}

/// First `n` frames of a part.
fn prefix<T: Real>(part: &PartAnim<T>, n: usize) -> Result<PartAnim<T>> {
    let m = part.n_vertices();
    let anim = Anim::from_flat(
        part.anim.positions()[..n * m].to_vec(),
        m,
        part.anim.triangles().to_vec(),
        part.anim.cuts()[..n].to_vec(),
    )?;
    PartAnim::new(anim, part.global_vertices.clone())
}

/// Pieces needed to meet `cap` on the first `n` frames, for each `n` in `frame_counts`.
///
/// The minimal size is monotone in the prefix length (restricting a
/// labeling to a prefix never raises any frame's error), so each search
/// starts at the previous answer, warm-started from the previous library.
/// Unfrozen pieces are affine combinations of frames, so their frame
/// coefficients carry over to a longer prefix unchanged.
pub fn pieces_needed_curve<T: Real>(
    part: &PartAnim<T>,
    frame_counts: &[usize],
    cap: T,
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
) -> Result<Vec<(usize, usize)>> {
    check_cap(cap)?;
    let mut counts = frame_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    let mut d = 1;
    let mut carry: Option<Model<T>> = None;
    let mut out = Vec::with_capacity(counts.len());
    for n in counts {
        if n == 0 || n > part.n_frames() {
            return Err(Error::InvalidConfig(format!("prefix of {n} frames out of range")));
        }
        let sub = prefix(part, n)?;
        let warm = carry.take().filter(|m| m.p.ncols() <= n).map(|m| {
            let mut p = nalgebra::DMatrix::zeros(n, m.p.ncols());
            p.rows_mut(0, m.p.nrows()).copy_from(&m.p);
            Model { p, q: nalgebra::DMatrix::zeros(0, m.p.ncols()) }
        });
        let (point, model) = cap_search(&sub, cap, d.min(n), weights, config, warm)?;
        d = point.d;
        carry = Some(model);
        out.push((n, d));
    }
    Ok(out)
}

/// Optimizes at every `lambda` and pairs each with the best of all results.
///
/// All optimized `(R, l)` pairs are pooled; for each `lambda` the pair
/// minimizing `position + lambda * velocity` is reported. Over a shared
/// pool the velocity term is non-increasing and the position term
/// non-decreasing in `lambda`.
pub fn lambda_sweep<T: Real>(
    part: &PartAnim<T>,
    d: usize,
    lambdas: &[T],
    weights: &SaliencyWeights<T>,
    config: &OptimConfig<T>,
) -> Result<Vec<LambdaPoint<T>>> {
    validate(part, d, weights, config, None)?;
    let prep = Prepared::new(part, weights, None, part.n_frames() <= GRAM_MAX_FRAMES);
    let mut pool = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = config.clone().with_lambda(lambda);
        cfg.check()?;
        let (library, assignment) = if d == part.n_frames() {
            let lib = ReplacementLibrary::new(part.matrix().into_owned(), vec![false; d])?;
            (lib, Assignment::new((0..d).collect()))
        } else {
            let problem = Problem { prep: &prep, d, lambda, frozen: vec![false; d] };
            let (state, _, _) = best_of_restarts(&problem, &cfg, None)?;
            let (lib, a, _) = finish(part, &prep, &state, None, lambda, weights)?;
            (lib, a)
        };
        let terms = energy_terms(part, &library, &assignment, weights)?;
        pool.push((terms, library, assignment));
    }
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let mut best = 0;
            for (i, (t, _, _)) in pool.iter().enumerate() {
                if t.total(lambda) < pool[best].0.total(lambda) {
                    best = i;
                }
            }
            let (terms, library, assignment) = &pool[best];
            LambdaPoint {
                lambda,
                position: terms.position,
                velocity: terms.velocity,
                source: best,
                library: library.clone(),
                assignment: assignment.clone(),
            }
        })
        .collect())
}
