//! Dinic max-flow and submodular binary energy minimization via s-t min-cut.

use std::collections::VecDeque;

use crate::scalar::Real;

/// Directed flow network with paired residual arcs.
#[derive(Clone, Debug)]
pub struct FlowGraph<T> {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<T>,
}

impl<T: Real> FlowGraph<T> {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            head: vec![Vec::new(); n_nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.head.len()
    }

    /// Adds arc `u -> v` with capacity `cap_uv` and its reverse with `cap_vu`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap_uv: T, cap_vu: T) {
        debug_assert!(cap_uv >= T::zero() && cap_vu >= T::zero());
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(cap_uv);
        self.head[u].push(e);
        self.to.push(u);
        self.cap.push(cap_vu);
        self.head[v].push(e + 1);
    }

    fn levels(&self, s: usize, t: usize, tol: T) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.n_nodes()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > tol && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    /// Computes the maximum `s -> t` flow, leaving residual capacities behind.
    ///
    /// Residual capacities at or below `tol` are treated as saturated.
    pub fn max_flow(&mut self, s: usize, t: usize, tol: T) -> T {
        let mut total = T::zero();
        let mut path: Vec<usize> = Vec::new();
        while let Some(level) = self.levels(s, t, tol) {
            let mut next = vec![0usize; self.n_nodes()];
            // Iterative DFS for blocking flow.
            'augment: loop {
                path.clear();
                let mut u = s;
                loop {
                    if u == t {
                        let mut bottleneck = T::INFINITY;
                        for &e in &path {
                            bottleneck = bottleneck.min(self.cap[e]);
                        }
                        for &e in &path {
                            self.cap[e] -= bottleneck;
                            self.cap[e ^ 1] += bottleneck;
                        }
                        total += bottleneck;
                        continue 'augment;
                    }
                    let mut advanced = false;
                    while next[u] < self.head[u].len() {
                        let e = self.head[u][next[u]];
                        let v = self.to[e];
                        if self.cap[e] > tol && level[v] == level[u] + 1 {
                            path.push(e);
                            u = v;
                            advanced = true;
                            break;
                        }
                        next[u] += 1;
                    }
                    if !advanced {
                        if u == s {
                            break 'augment;
                        }
                        // Dead end: retreat and skip the arc that led here.
                        let e = path.pop().expect("non-source node has an incoming path arc");
                        u = self.to[e ^ 1];
                        next[u] += 1;
                    }
                }
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual graph (the source side of a min cut).
    pub fn source_side(&self, s: usize, tol: T) -> Vec<bool> {
        let mut seen = vec![false; self.n_nodes()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > tol && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Energy over binary variables: unary costs plus submodular pairwise terms.
#[derive(Clone, Debug)]
pub struct BinaryEnergy<T> {
    constant: T,
    cost0: Vec<T>,
    cost1: Vec<T>,
    pairs: Vec<(usize, usize, T)>,
    scale: T,
}

impl<T: Real> BinaryEnergy<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            constant: T::zero(),
            cost0: vec![T::zero(); n_vars],
            cost1: vec![T::zero(); n_vars],
            pairs: Vec::new(),
            scale: T::zero(),
        }
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    /// Adds `e0` when `x_i = 0` and `e1` when `x_i = 1`.
    pub fn add_unary(&mut self, i: usize, e0: T, e1: T) {
        self.cost0[i] += e0;
        self.cost1[i] += e1;
        self.scale = self.scale.max(e0.abs()).max(e1.abs());
    }

    /// Adds the table `E(0,0)=a, E(0,1)=b, E(1,0)=c, E(1,1)=d` on `(x_i, x_j)`.
    ///
    /// Requires `b + c >= a + d`.
    pub fn add_pairwise(&mut self, i: usize, j: usize, a: T, b: T, c: T, d: T) {
        let coupling = b + c - a - d;
        assert!(
            coupling >= -T::lit(1e3) * T::EPS * (b.abs() + c.abs() + a.abs() + d.abs()),
            "pairwise term is not submodular"
        );
        self.constant += a;
        self.add_unary(i, T::zero(), c - a);
        self.add_unary(j, T::zero(), d - c);
        if coupling > T::zero() {
            self.pairs.push((i, j, coupling));
            self.scale = self.scale.max(coupling);
        }
    }

    /// Returns the minimizing assignment (`true` = 1) and its energy.
    pub fn minimize(&self) -> (Vec<bool>, T) {
        let n = self.cost0.len();
        let (s, t) = (n, n + 1);
        let mut graph = FlowGraph::new(n + 2);
        let mut constant = self.constant;
        for i in 0..n {
            let lo = self.cost0[i].min(self.cost1[i]);
            constant += lo;
            let (to_sink, from_source) = (self.cost0[i] - lo, self.cost1[i] - lo);
            if from_source > T::zero() || to_sink > T::zero() {
                graph.add_edge(s, i, from_source, T::zero());
                graph.add_edge(i, t, to_sink, T::zero());
            }
        }
        for &(i, j, w) in &self.pairs {
            graph.add_edge(i, j, w, T::zero());
        }
        let tol = self.scale * T::from_usize_lossy(n + 2) * T::EPS * T::lit(4.0);
        let flow = graph.max_flow(s, t, tol);
        let side = graph.source_side(s, tol);
        let x: Vec<bool> = (0..n).map(|i| !side[i]).collect();
        (x, constant + flow)
    }

    /// Direct evaluation of the energy of an assignment.
    pub fn evaluate(&self, x: &[bool]) -> T {
        let mut e = self.constant;
        for (i, &xi) in x.iter().enumerate() {
            e += if xi { self.cost1[i] } else { self.cost0[i] };
        }
        for &(i, j, w) in &self.pairs {
            if !x[i] && x[j] {
                e += w;
            }
        }
        e
    }
}
