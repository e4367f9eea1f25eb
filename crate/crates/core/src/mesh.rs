//! Connectivity and per-triangle geometry of triangle meshes.

use std::collections::HashMap;

use crate::scalar::{cross, norm, sub, Real};

/// Edge, dual-graph and one-ring adjacency of a triangle list.
#[derive(Clone, Debug)]
pub struct Topology {
    n_vertices: usize,
    /// Undirected edges, `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// Triangles incident on each edge.
    pub edge_triangles: Vec<Vec<usize>>,
    /// `(neighbor triangle, shared edge)` pairs per triangle.
    pub triangle_neighbors: Vec<Vec<(usize, usize)>>,
    /// Sorted one-ring vertex neighbors.
    pub vertex_neighbors: Vec<Vec<usize>>,
    pub vertex_triangles: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl Topology {
    pub fn new(n_vertices: usize, triangles: &[[usize; 3]]) -> Self {
        let mut edge_index = HashMap::with_capacity(triangles.len() * 3 / 2 + 1);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut vertex_triangles = vec![Vec::new(); n_vertices];
        for (t, tri) in triangles.iter().enumerate() {
            for c in 0..3 {
                vertex_triangles[tri[c]].push(t);
                let (a, b) = ordered(tri[c], tri[(c + 1) % 3]);
                let e = *edge_index.entry((a, b)).or_insert_with(|| {
                    edges.push([a, b]);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
            }
        }
        let mut triangle_neighbors = vec![Vec::new(); triangles.len()];
        for (e, tris) in edge_triangles.iter().enumerate() {
            for (i, &s) in tris.iter().enumerate() {
                for &t in &tris[i + 1..] {
                    if s != t {
                        triangle_neighbors[s].push((t, e));
                        triangle_neighbors[t].push((s, e));
                    }
                }
            }
        }
        let mut vertex_neighbors = vec![Vec::new(); n_vertices];
        for &[a, b] in &edges {
            vertex_neighbors[a].push(b);
            vertex_neighbors[b].push(a);
        }
        for nb in &mut vertex_neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        Self {
            n_vertices,
            edges,
            edge_triangles,
            triangle_neighbors,
            vertex_neighbors,
            vertex_triangles,
            edge_index,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&ordered(a, b)).copied()
    }

    /// Connected components over triangles; returns a component id per triangle.
    pub fn triangle_components(&self) -> Vec<usize> {
        let k = self.triangle_neighbors.len();
        let mut comp = vec![usize::MAX; k];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..k {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(t) = stack.pop() {
                for &(u, _) in &self.triangle_neighbors[t] {
                    if comp[u] == usize::MAX {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

#[inline]
fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn triangle_area<T: Real>(p: &[[T; 3]], tri: &[usize; 3]) -> T {
    let e1 = sub(&p[tri[1]], &p[tri[0]]);
    let e2 = sub(&p[tri[2]], &p[tri[0]]);
    norm(&cross(&e1, &e2)) * T::lit(0.5)
}

pub fn triangle_centroid<T: Real>(p: &[[T; 3]], tri: &[usize; 3]) -> [T; 3] {
    let third = T::one() / T::lit(3.0);
    let mut c = [T::zero(); 3];
    for &v in tri {
        for i in 0..3 {
            c[i] += p[v][i];
        }
    }
    [c[0] * third, c[1] * third, c[2] * third]
}

/// Cotangents of the three corner angles of a triangle.
pub fn corner_cotangents<T: Real>(p: &[[T; 3]], tri: &[usize; 3]) -> [T; 3] {
    let mut cot = [T::zero(); 3];
    for c in 0..3 {
        let o = p[tri[c]];
        let u = sub(&p[tri[(c + 1) % 3]], &o);
        let v = sub(&p[tri[(c + 2) % 3]], &o);
        let d = crate::scalar::dot(&u, &v);
        let x = norm(&cross(&u, &v));
        cot[c] = if x > T::zero() { d / x } else { T::zero() };
    }
    cot
}
