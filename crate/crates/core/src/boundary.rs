//! Smooth part boundaries.
//!
//! Per-triangle part indicators become per-vertex votes (animation-averaged
//! area weights), are smoothed by an affine averaging operator, and the
//! argmax regions of the smoothed votes are meshed exactly: crossing
//! vertices are inserted on existing edges, so every frame keeps its
//! geometry and all frames keep one shared connectivity.

use crate::anim::{average_mesh, Anim};
use crate::error::{Error, Result};
use crate::mesh::{triangle_area, Topology};
use crate::scalar::{dist2, lerp, Real};
use crate::segmentation::TriLabeling;

pub const DEFAULT_SMOOTHING_ITERATIONS: usize = 20;
pub const DEFAULT_SMOOTHING_STEP: f64 = 0.5;
/// Edge crossings closer than this (in edge parameter) to an endpoint snap to it.
pub const DEFAULT_SNAP: f64 = 1e-3;

/// `votes[j][v]`: how strongly vertex `v` belongs to part `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteField<T> {
    pub votes: Vec<Vec<T>>,
}

impl<T: Real> VoteField<T> {
    pub fn n_parts(&self) -> usize {
        self.votes.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.votes.first().map_or(0, Vec::len)
    }

    /// Highest-voted part of a vertex; ties go to the lowest part index.
    pub fn argmax(&self, v: usize) -> usize {
        argmax((0..self.n_parts()).map(|j| self.votes[j][v]))
    }

    /// Largest `|sum_j votes[j][v] - 1|` over all vertices.
    pub fn partition_error(&self) -> T {
        (0..self.n_vertices())
            .map(|v| (self.votes.iter().fold(T::zero(), |s, col| s + col[v]) - T::one()).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

fn argmax<T: Real>(values: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_v = -T::INFINITY;
    for (j, v) in values.enumerate() {
        if v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Area-weighted average of the part indicators around each vertex, using
/// each triangle's area averaged over all frames.
pub fn vertex_votes<T: Real>(anim: &Anim<T>, q: &TriLabeling, n_parts: usize) -> Result<VoteField<T>> {
    let tris = anim.triangles();
    if q.labels.len() != tris.len() {
        return Err(Error::Dimension(format!("{} labels for {} triangles", q.labels.len(), tris.len())));
    }
    if let Some(&bad) = q.labels.iter().find(|&&l| l >= n_parts) {
        return Err(Error::InvalidConfig(format!("label {bad} outside {n_parts} parts")));
    }
    let mut area = vec![T::zero(); tris.len()];
    for frame in anim.frames() {
        for (a, tri) in area.iter_mut().zip(tris) {
            *a += triangle_area(frame, tri);
        }
    }
    let inv_n = T::one() / T::from_usize_lossy(anim.n_frames());
    let m = anim.n_vertices();
    let mut votes = vec![vec![T::zero(); m]; n_parts];
    let mut total = vec![T::zero(); m];
    for (t, tri) in tris.iter().enumerate() {
        let a = area[t] * inv_n;
        for &v in tri {
            votes[q.labels[t]][v] += a;
            total[v] += a;
        }
    }
    for v in 0..m {
        if !(total[v] > T::zero()) {
            return Err(Error::DegenerateStar(v));
        }
        for col in &mut votes {
            col[v] /= total[v];
        }
    }
    Ok(VoteField { votes })
}

/// Row-stochastic neighbor averaging with clamped cotangent weights.
#[derive(Clone, Debug)]
pub struct SmoothingOperator<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> SmoothingOperator<T> {
    /// Built on one mesh (normally the animation average). Negative cotangent
    /// weights are clamped to zero; vertices left without weight fall back to
    /// uniform neighbor averaging.
    pub fn new(points: &[[T; 3]], triangles: &[[usize; 3]]) -> Self {
        let topo = Topology::new(points.len(), triangles);
        let mut weight = vec![T::zero(); topo.edges.len()];
        let half = T::lit(0.5);
        for tri in triangles {
            let cot = crate::mesh::corner_cotangents(points, tri);
            for c in 0..3 {
                let (i, j) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
                if let Some(e) = topo.edge_id(i, j) {
                    weight[e] += cot[c] * half;
                }
            }
        }
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); points.len()];
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            let w = weight[e].max(T::zero());
            rows[a].push((b, w));
            rows[b].push((a, w));
        }
        for row in &mut rows {
            let mut sum = row.iter().fold(T::zero(), |s, x| s + x.1);
            if !(sum > T::zero()) {
                for x in row.iter_mut() {
                    x.1 = T::one();
                }
                sum = T::from_usize_lossy(row.len());
            }
            for x in row.iter_mut() {
                x.1 /= sum;
            }
        }
        Self { rows }
    }

    fn apply(&self, values: &[T], step: T, out: &mut [T]) {
        let keep = T::one() - step;
        for (v, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                out[v] = values[v];
                continue;
            }
            let avg = row.iter().fold(T::zero(), |s, &(u, w)| s + w * values[u]);
            out[v] = keep * values[v] + step * avg;
        }
    }
}

/// `iterations` explicit steps of `v <- (1 - step) v + step * (weighted neighbor mean)`.
pub fn smooth_votes<T: Real>(
    votes: &VoteField<T>,
    op: &SmoothingOperator<T>,
    iterations: usize,
    step: T,
) -> Result<VoteField<T>> {
    if !(step > T::zero() && step <= T::one()) {
        return Err(Error::InvalidConfig(format!("smoothing step {step} outside (0, 1]")));
    }
    if op.rows.len() != votes.n_vertices() {
        return Err(Error::Dimension("smoothing operator and votes disagree on vertex count".into()));
    }
    let mut out = votes.clone();
    let mut scratch = vec![T::zero(); votes.n_vertices()];
    for col in &mut out.votes {
        for _ in 0..iterations {
            op.apply(col, step, &mut scratch);
            col.copy_from_slice(&scratch);
        }
    }
    Ok(out)
}

/// Where a remeshed vertex comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexOrigin<T> {
    Original(usize),
    /// `(1 - t) * a + t * b` in every frame.
    OnEdge { a: usize, b: usize, t: T },
}

/// Remeshed animation with a per-triangle part label.
#[derive(Clone, Debug)]
pub struct SegmentedAnim<T> {
    pub anim: Anim<T>,
    pub part_labels: Vec<usize>,
    pub n_parts: usize,
    /// Sorted vertices incident to triangles of different parts.
    pub seam_vertices: Vec<usize>,
    /// Input triangle each output triangle lies in.
    pub parent_triangle: Vec<usize>,
    pub vertex_origin: Vec<VertexOrigin<T>>,
}

impl<T: Real> SegmentedAnim<T> {
    /// Wraps an animation and labeling without remeshing.
    pub fn from_labels(anim: Anim<T>, labels: Vec<usize>, n_parts: usize) -> Result<Self> {
        if labels.len() != anim.n_triangles() {
            return Err(Error::Dimension(format!("{} labels for {} triangles", labels.len(), anim.n_triangles())));
        }
        let seam_vertices = seam_vertices(anim.n_vertices(), anim.triangles(), &labels);
        let parent_triangle = (0..anim.n_triangles()).collect();
        let vertex_origin = (0..anim.n_vertices()).map(VertexOrigin::Original).collect();
        Ok(Self {
            anim,
            part_labels: labels,
            n_parts,
            seam_vertices,
            parent_triangle,
            vertex_origin,
        })
    }

    /// Carries a per-input-vertex scalar onto the remeshed vertices by linear
    /// interpolation along split edges.
    pub fn interpolate_vertex_scalars(&self, values: &[T]) -> Vec<T> {
        self.vertex_origin
            .iter()
            .map(|o| match *o {
                VertexOrigin::Original(i) => values[i],
                VertexOrigin::OnEdge { a, b, t } => (T::one() - t) * values[a] + t * values[b],
            })
            .collect()
    }
}

pub fn seam_vertices(n_vertices: usize, triangles: &[[usize; 3]], labels: &[usize]) -> Vec<usize> {
    let mut first = vec![usize::MAX; n_vertices];
    let mut seam = vec![false; n_vertices];
    for (tri, &l) in triangles.iter().zip(labels) {
        for &v in tri {
            if first[v] == usize::MAX {
                first[v] = l;
            } else if first[v] != l {
                seam[v] = true;
            }
        }
    }
    (0..n_vertices).filter(|&v| seam[v]).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions<T> {
    /// Crossings within this edge parameter of an endpoint snap to it.
    pub snap: T,
    /// Connected label regions with fewer triangles are absorbed into their
    /// most common neighbor label; 0 disables.
    pub min_island: usize,
}

impl<T: Real> Default for ExtractOptions<T> {
    fn default() -> Self {
        Self {
            snap: T::lit(DEFAULT_SNAP),
            min_island: 0,
        }
    }
}

/// Meshes the argmax boundary of `votes` into the animation.
pub fn extract_smooth_boundary<T: Real>(
    anim: &Anim<T>,
    votes: &VoteField<T>,
    options: &ExtractOptions<T>,
) -> Result<SegmentedAnim<T>> {
    let m = anim.n_vertices();
    if votes.n_vertices() != m {
        return Err(Error::Dimension(format!("{} votes for {} vertices", votes.n_vertices(), m)));
    }
    let s = votes.n_parts();
    let tris = anim.triangles();
    let topo = Topology::new(m, tris);
    let label: Vec<usize> = (0..m).map(|v| votes.argmax(v)).collect();

    // Crossing vertex per edge, if any.
    let mut origin: Vec<VertexOrigin<T>> = (0..m).map(VertexOrigin::Original).collect();
    let mut edge_vertex = vec![usize::MAX; topo.edges.len()];
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        let (i, j) = (label[a], label[b]);
        if i == j {
            continue;
        }
        let ga = votes.votes[i][a] - votes.votes[j][a];
        let gb = votes.votes[i][b] - votes.votes[j][b];
        let denom = ga - gb;
        if !(denom > T::zero()) {
            continue;
        }
        let t = ga / denom;
        if t <= options.snap || t >= T::one() - options.snap {
            continue;
        }
        edge_vertex[e] = origin.len();
        origin.push(VertexOrigin::OnEdge { a, b, t });
    }

    let avg = average_mesh(anim);
    let avg_point = |v: usize| -> [T; 3] {
        match origin[v] {
            VertexOrigin::Original(i) => avg.values[i],
            VertexOrigin::OnEdge { a, b, t } => lerp(&avg.values[a], &avg.values[b], t),
        }
    };

    let mut out_tris: Vec<[usize; 3]> = Vec::with_capacity(tris.len() + 2 * (origin.len() - m));
    let mut parent = Vec::with_capacity(out_tris.capacity());
    for (t, tri) in tris.iter().enumerate() {
        let split = |c: usize| -> Option<usize> {
            let e = topo.edge_id(tri[c], tri[(c + 1) % 3]).expect("triangle edge exists");
            (edge_vertex[e] != usize::MAX).then_some(edge_vertex[e])
        };
        let cuts = [split(0), split(1), split(2)];
        let before = out_tris.len();
        match cuts.iter().filter(|c| c.is_some()).count() {
            0 => out_tris.push(*tri),
            1 => {
                let c = cuts.iter().position(Option::is_some).unwrap();
                let e = cuts[c].unwrap();
                let (v0, v1, v2) = (tri[c], tri[(c + 1) % 3], tri[(c + 2) % 3]);
                out_tris.push([v0, e, v2]);
                out_tris.push([e, v1, v2]);
            }
            2 => {
                // Rotate so the edges (v0,v1) and (v1,v2) are split.
                let c = (0..3).find(|&c| cuts[c].is_some() && cuts[(c + 1) % 3].is_some()).unwrap();
                let (v0, v1, v2) = (tri[c], tri[(c + 1) % 3], tri[(c + 2) % 3]);
                let (e0, e1) = (cuts[c].unwrap(), cuts[(c + 1) % 3].unwrap());
                out_tris.push([e0, v1, e1]);
                // Split the remaining quad (v0, e0, e1, v2) along its shorter diagonal.
                if dist2(&avg_point(v0), &avg_point(e1)) <= dist2(&avg_point(e0), &avg_point(v2)) {
                    out_tris.push([v0, e0, e1]);
                    out_tris.push([v0, e1, v2]);
                } else {
                    out_tris.push([v0, e0, v2]);
                    out_tris.push([e0, e1, v2]);
                }
            }
            _ => {
                let (e0, e1, e2) = (cuts[0].unwrap(), cuts[1].unwrap(), cuts[2].unwrap());
                out_tris.push([tri[0], e0, e2]);
                out_tris.push([e0, tri[1], e1]);
                out_tris.push([e2, e1, tri[2]]);
                out_tris.push([e0, e1, e2]);
            }
        }
        parent.extend(std::iter::repeat_n(t, out_tris.len() - before));
    }

    // Votes are linear along edges, so interpolate them onto new vertices.
    let vote_at = |j: usize, v: usize| -> T {
        match origin[v] {
            VertexOrigin::Original(i) => votes.votes[j][i],
            VertexOrigin::OnEdge { a, b, t } => (T::one() - t) * votes.votes[j][a] + t * votes.votes[j][b],
        }
    };
    let mut labels: Vec<usize> = out_tris
        .iter()
        .map(|tri| argmax((0..s).map(|j| vote_at(j, tri[0]) + vote_at(j, tri[1]) + vote_at(j, tri[2]))))
        .collect();

    let new_m = origin.len();
    if options.min_island > 0 {
        absorb_islands(new_m, &out_tris, &mut labels, options.min_island);
    }

    let n = anim.n_frames();
    let mut positions = Vec::with_capacity(n * new_m);
    for frame in anim.frames() {
        positions.extend(origin.iter().map(|o| match *o {
            VertexOrigin::Original(i) => frame[i],
            VertexOrigin::OnEdge { a, b, t } => lerp(&frame[a], &frame[b], t),
        }));
    }
    let seam = seam_vertices(new_m, &out_tris, &labels);
    let out_anim = Anim::from_flat(positions, new_m, out_tris, anim.cuts().to_vec())?;
    Ok(SegmentedAnim {
        anim: out_anim,
        part_labels: labels,
        n_parts: s,
        seam_vertices: seam,
        parent_triangle: parent,
        vertex_origin: origin,
    })
}

fn absorb_islands(n_vertices: usize, tris: &[[usize; 3]], labels: &mut [usize], min_island: usize) {
    let topo = Topology::new(n_vertices, tris);
    // Each pass removes at least one island or stops.
    for _ in 0..tris.len() {
        let mut comp = vec![usize::MAX; tris.len()];
        let mut components: Vec<Vec<usize>> = Vec::new();
        for start in 0..tris.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut i = 0;
            while i < members.len() {
                let t = members[i];
                for &(u, _) in &topo.triangle_neighbors[t] {
                    if comp[u] == usize::MAX && labels[u] == labels[t] {
                        comp[u] = id;
                        members.push(u);
                    }
                }
                i += 1;
            }
            components.push(members);
        }
        let smallest = components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() < min_island)
            .filter_map(|(id, c)| {
                let mut counts = std::collections::BTreeMap::new();
                for &t in c {
                    for &(u, _) in &topo.triangle_neighbors[t] {
                        if comp[u] != id {
                            *counts.entry(labels[u]).or_insert(0usize) += 1;
                        }
                    }
                }
                let target = counts.iter().max_by_key(|(l, n)| (**n, std::cmp::Reverse(**l)))?.0;
                Some((c.len(), id, *target))
            })
            .min();
        let Some((_, id, target)) = smallest else {
            return;
        };
        for &t in &components[id] {
            labels[t] = target;
        }
    }
}
