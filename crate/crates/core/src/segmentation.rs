//! Per-triangle part labeling that favors short cuts through still regions.
//!
//! Each triangle pays its geodesic distance to the seeds of its part; each
//! pair of adjacent triangles with different parts pays
//! `sum_f |e_f| * (1 + sum_{i in e} |x_fi - avg_i|)` for their shared edge `e`,
//! scaled by `gamma`. Two parts are solved exactly with one min-cut, more
//! with alpha-expansion.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::anim::{average_mesh, Anim, VertexField};
use crate::error::{Error, Result};
use crate::maxflow::BinaryEnergy;
use crate::mesh::{triangle_centroid, Topology};
use crate::scalar::{dist, Real};

pub const DEFAULT_GAMMA: f64 = 100.0;

/// Seed triangles for each of `s >= 2` parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSet {
    parts: Vec<Vec<usize>>,
}

impl SeedSet {
    pub fn new(parts: Vec<Vec<usize>>, n_triangles: usize) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::InvalidSeeds(format!("need at least 2 parts, got {}", parts.len())));
        }
        let mut owner = vec![usize::MAX; n_triangles];
        for (j, tris) in parts.iter().enumerate() {
            if tris.is_empty() {
                return Err(Error::InvalidSeeds(format!("part {j} has no seed triangles")));
            }
            for &t in tris {
                if t >= n_triangles {
                    return Err(Error::InvalidSeeds(format!("seed triangle {t} out of range")));
                }
                if owner[t] != usize::MAX && owner[t] != j {
                    return Err(Error::InvalidSeeds(format!("triangle {t} seeds parts {} and {j}", owner[t])));
                }
                owner[t] = j;
            }
        }
        Ok(Self { parts })
    }

    pub fn n_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    /// Seed owner per triangle, if any.
    pub fn owners(&self, n_triangles: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n_triangles];
        for (j, tris) in self.parts.iter().enumerate() {
            for &t in tris {
                owner[t] = Some(j);
            }
        }
        owner
    }
}

/// Part index (0-based) per triangle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriLabeling {
    pub labels: Vec<usize>,
}

#[derive(PartialEq)]
struct Item<T>(T, usize);

impl<T: Real> Eq for Item<T> {}

impl<T: Real> Ord for Item<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then_with(|| other.1.cmp(&self.1))
    }
}

impl<T: Real> PartialOrd for Item<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dual_dijkstra<T: Real>(centroids: &[[T; 3]], topo: &Topology, sources: &[usize]) -> Vec<T> {
    let mut d = vec![T::INFINITY; centroids.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        d[s] = T::zero();
        heap.push(Item(T::zero(), s));
    }
    while let Some(Item(du, u)) = heap.pop() {
        if du > d[u] {
            continue;
        }
        for &(v, _) in &topo.triangle_neighbors[u] {
            let alt = du + dist(&centroids[u], &centroids[v]);
            if alt < d[v] {
                d[v] = alt;
                heap.push(Item(alt, v));
            }
        }
    }
    d
}

/// `dist[j][t]`: shortest dual-graph path length (centroid to centroid) from
/// triangle `t` to any seed of part `j`; `+inf` when unreachable.
pub fn geodesic_distances<T: Real>(avg: &VertexField<T>, triangles: &[[usize; 3]], seeds: &SeedSet) -> Vec<Vec<T>> {
    let topo = Topology::new(avg.len(), triangles);
    geodesic_distances_with(avg, triangles, &topo, seeds)
}

fn geodesic_distances_with<T: Real>(
    avg: &VertexField<T>,
    triangles: &[[usize; 3]],
    topo: &Topology,
    seeds: &SeedSet,
) -> Vec<Vec<T>> {
    let centroids: Vec<[T; 3]> = triangles.iter().map(|t| triangle_centroid(&avg.values, t)).collect();
    seeds.parts().par_iter().map(|src| dual_dijkstra(&centroids, topo, src)).collect()
}

/// Scale that maps the principal-axis bounding box of `points` to unit size
/// along its longest side. Rigid motions leave it unchanged.
pub fn unit_box_scale<T: Real>(points: &[[T; 3]]) -> T {
    let n = T::from_usize_lossy(points.len().max(1));
    let mut mean = [T::zero(); 3];
    for p in points {
        for c in 0..3 {
            mean[c] += p[c] / n;
        }
    }
    let mut cov = Matrix3::<T>::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    let axes = SymmetricEigen::new(cov).eigenvectors;
    let mut extent = T::zero();
    for a in 0..3 {
        let axis = axes.column(a);
        let (mut lo, mut hi) = (T::INFINITY, -T::INFINITY);
        for p in points {
            let x = p[0] * axis[0] + p[1] * axis[1] + p[2] * axis[2];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        extent = extent.max(hi - lo);
    }
    if extent > T::zero() {
        T::one() / extent
    } else {
        T::one()
    }
}

/// Unary table and pairwise cut weights of the segmentation energy.
#[derive(Clone, Debug)]
pub struct SegmentationProblem<T> {
    /// `unary[t][j]`, `None` when part `j` cannot reach triangle `t`.
    pub unary: Vec<Vec<Option<T>>>,
    /// `(a, b, w)` for adjacent triangles; the cut costs `gamma * w`.
    pub pairs: Vec<(usize, usize, T)>,
    pub seed_owner: Vec<Option<usize>>,
    pub gamma: T,
    /// Triangles that no seed can reach.
    pub unreachable: Vec<usize>,
}

impl<T: Real> SegmentationProblem<T> {
    pub fn new(anim: &Anim<T>, seeds: &SeedSet, gamma: T) -> Self {
        let avg = average_mesh(anim);
        let tris = anim.triangles();
        let topo = Topology::new(anim.n_vertices(), tris);
        let dist_table = geodesic_distances_with(&avg, tris, &topo, seeds);
        let s = seeds.n_parts();
        let mut unreachable = Vec::new();
        let unary = (0..tris.len())
            .map(|t| {
                let row: Vec<Option<T>> = (0..s)
                    .map(|j| Some(dist_table[j][t]).filter(|d| d.is_finite_value()))
                    .collect();
                if row.iter().all(Option::is_none) {
                    unreachable.push(t);
                    vec![Some(T::zero()); s]
                } else {
                    row
                }
            })
            .collect();
        let pairs = cut_weights(anim, &avg, &topo);
        Self {
            unary,
            pairs,
            seed_owner: seeds.owners(tris.len()),
            gamma,
            unreachable,
        }
    }

    pub fn n_parts(&self) -> usize {
        self.unary.first().map_or(0, Vec::len)
    }

    fn allowed(&self, t: usize, j: usize) -> bool {
        match self.seed_owner[t] {
            Some(owner) => owner == j,
            None => self.unary[t][j].is_some(),
        }
    }

    /// Unary part of the energy; `+inf` if a triangle takes an unreachable part.
    pub fn unary_energy(&self, labels: &[usize]) -> T {
        labels
            .iter()
            .enumerate()
            .map(|(t, &j)| self.unary[t][j].unwrap_or(T::INFINITY))
            .fold(T::zero(), |a, b| a + b)
    }

    /// Sum of cut weights (without `gamma`).
    pub fn cut_length(&self, labels: &[usize]) -> T {
        self.pairs
            .iter()
            .filter(|(a, b, _)| labels[*a] != labels[*b])
            .fold(T::zero(), |acc, (_, _, w)| acc + *w)
    }

    pub fn energy(&self, labels: &[usize]) -> T {
        self.unary_energy(labels) + self.gamma * self.cut_length(labels)
    }

    /// Nearest-seed labeling (ties to the lowest part), seeds forced.
    pub fn unary_labeling(&self) -> Vec<usize> {
        (0..self.unary.len())
            .map(|t| {
                if let Some(j) = self.seed_owner[t] {
                    return j;
                }
                let mut best = 0;
                let mut best_d = T::INFINITY;
                for (j, d) in self.unary[t].iter().enumerate() {
                    if let Some(d) = *d {
                        if d < best_d {
                            best = j;
                            best_d = d;
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// Exact two-part minimization via one s-t min-cut.
    fn solve_two(&self) -> Vec<usize> {
        let k = self.unary.len();
        let mut labels = self.unary_labeling();
        let mut var = vec![usize::MAX; k];
        let mut n_vars = 0;
        for t in 0..k {
            if self.allowed(t, 0) && self.allowed(t, 1) {
                var[t] = n_vars;
                n_vars += 1;
            }
        }
        if n_vars == 0 {
            return labels;
        }
        let mut energy = BinaryEnergy::new(n_vars);
        for t in 0..k {
            if var[t] != usize::MAX {
                energy.add_unary(var[t], self.unary[t][0].unwrap(), self.unary[t][1].unwrap());
            }
        }
        for &(a, b, w) in &self.pairs {
            let w = self.gamma * w;
            match (var[a], var[b]) {
                (usize::MAX, usize::MAX) => {}
                (va, usize::MAX) => {
                    let fixed = labels[b];
                    energy.add_unary(va, if fixed == 0 { T::zero() } else { w }, if fixed == 1 { T::zero() } else { w });
                }
                (usize::MAX, vb) => {
                    let fixed = labels[a];
                    energy.add_unary(vb, if fixed == 0 { T::zero() } else { w }, if fixed == 1 { T::zero() } else { w });
                }
                (va, vb) => energy.add_pairwise(va, vb, T::zero(), w, w, T::zero()),
            }
        }
        let (x, _) = energy.minimize();
        for t in 0..k {
            if var[t] != usize::MAX {
                labels[t] = usize::from(x[var[t]]);
            }
        }
        labels
    }

    /// One expansion move toward `alpha`; returns the improved labeling.
    fn expand(&self, labels: &[usize], alpha: usize) -> Vec<usize> {
        let k = labels.len();
        let mut var = vec![usize::MAX; k];
        let mut n_vars = 0;
        for t in 0..k {
            if labels[t] != alpha && self.allowed(t, alpha) && self.seed_owner[t].is_none() {
                var[t] = n_vars;
                n_vars += 1;
            }
        }
        let mut out = labels.to_vec();
        if n_vars == 0 {
            return out;
        }
        let mut energy = BinaryEnergy::new(n_vars);
        for t in 0..k {
            if var[t] != usize::MAX {
                let keep = self.unary[t][labels[t]].unwrap_or(T::INFINITY);
                energy.add_unary(var[t], keep, self.unary[t][alpha].unwrap());
            }
        }
        let potts = |a: usize, b: usize, w: T| if a == b { T::zero() } else { w };
        for &(a, b, w) in &self.pairs {
            let w = self.gamma * w;
            match (var[a], var[b]) {
                (usize::MAX, usize::MAX) => {}
                (va, usize::MAX) => energy.add_unary(va, potts(labels[a], labels[b], w), potts(alpha, labels[b], w)),
                (usize::MAX, vb) => energy.add_unary(vb, potts(labels[a], labels[b], w), potts(labels[a], alpha, w)),
                (va, vb) => energy.add_pairwise(va, vb, potts(labels[a], labels[b], w), w, w, T::zero()),
            }
        }
        let (x, _) = energy.minimize();
        for t in 0..k {
            if var[t] != usize::MAX && x[var[t]] {
                out[t] = alpha;
            }
        }
        out
    }

    /// Alpha-expansion from the nearest-seed labeling until no move helps.
    fn solve_expansion(&self) -> Vec<usize> {
        let mut labels = self.unary_labeling();
        let mut energy = self.energy(&labels);
        let s = self.n_parts();
        loop {
            let mut improved = false;
            for alpha in 0..s {
                let candidate = self.expand(&labels, alpha);
                let e = self.energy(&candidate);
                if e < energy - energy.abs() * T::lit(1e-12) {
                    labels = candidate;
                    energy = e;
                    improved = true;
                }
            }
            if !improved {
                return labels;
            }
        }
    }

    pub fn solve(&self) -> Vec<usize> {
        if self.gamma <= T::zero() {
            self.unary_labeling()
        } else if self.n_parts() == 2 {
            let labels = self.solve_two();
            let init = self.unary_labeling();
            // The cut is exact; keep the tie-broken initializer on exact ties.
            if self.energy(&labels) < self.energy(&init) {
                labels
            } else {
                init
            }
        } else {
            self.solve_expansion()
        }
    }
}

/// Cut weight per adjacent triangle pair, summed over frames.
fn cut_weights<T: Real>(anim: &Anim<T>, avg: &VertexField<T>, topo: &Topology) -> Vec<(usize, usize, T)> {
    let mut edge_weight = vec![T::zero(); topo.edges.len()];
    for frame in anim.frames() {
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            let disp = dist(&frame[a], &avg.values[a]) + dist(&frame[b], &avg.values[b]);
            edge_weight[e] += dist(&frame[a], &frame[b]) * (T::one() + disp);
        }
    }
    let mut pairs = Vec::new();
    for (e, tris) in topo.edge_triangles.iter().enumerate() {
        for (i, &a) in tris.iter().enumerate() {
            for &b in &tris[i + 1..] {
                if a != b {
                    pairs.push((a, b, edge_weight[e]));
                }
            }
        }
    }
    pairs
}

/// Energy of a labeling in the input's own units.
pub fn segmentation_energy<T: Real>(anim: &Anim<T>, q: &TriLabeling, seeds: &SeedSet, gamma: T) -> T {
    SegmentationProblem::new(anim, seeds, gamma).energy(&q.labels)
}

/// Result of [`segment_parts`].
#[derive(Clone, Debug)]
pub struct Segmentation<T> {
    pub labeling: TriLabeling,
    /// Uniform scale applied before optimizing (unit principal-axis box).
    pub scale: T,
    /// Energy in scaled units.
    pub energy: T,
    /// Energy of the nearest-seed initializer in scaled units.
    pub initial_energy: T,
    /// Triangles not reachable from any seed (labeled by tie rule).
    pub unreachable: Vec<usize>,
}

/// Rescales the animation uniformly so the average mesh fits a unit box.
pub fn normalize_scale<T: Real>(anim: &Anim<T>) -> (Anim<T>, T) {
    let avg = average_mesh(anim);
    let c = unit_box_scale(&avg.values);
    (anim.map_positions(|p| [p[0] * c, p[1] * c, p[2] * c]), c)
}

pub fn segment_parts<T: Real>(anim: &Anim<T>, seeds: &SeedSet, gamma: T) -> Result<Segmentation<T>> {
    if seeds.n_parts() < 2 {
        return Err(Error::InvalidSeeds("need at least 2 parts".into()));
    }
    if seeds.parts().iter().flatten().any(|&t| t >= anim.n_triangles()) {
        return Err(Error::InvalidSeeds("seed triangle out of range".into()));
    }
    if gamma < T::zero() || !gamma.is_finite_value() {
        return Err(Error::InvalidConfig("gamma must be finite and non-negative".into()));
    }
    let (scaled, scale) = normalize_scale(anim);
    let problem = SegmentationProblem::new(&scaled, seeds, gamma);
    let labels = problem.solve();
    let energy = problem.energy(&labels);
    let initial_energy = problem.energy(&problem.unary_labeling());
    Ok(Segmentation {
        labeling: TriLabeling { labels },
        scale,
        energy,
        initial_energy,
        unreachable: problem.unreachable,
    })
}
