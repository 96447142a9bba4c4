//! Weighted undirected graphs, the generators used in the experiments, kNN
//! construction from point clouds and cut sparsity.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// An undirected weighted edge stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Immutable weighted undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    p: usize,
    edges: Vec<Edge>,
    connected: bool,
}

impl Graph {
    /// Builds a graph from an edge list. Edges are canonicalized to `u < v`
    /// and sorted; self-loops, duplicate pairs and non-positive weights are
    /// rejected.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidGraph(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= p || b >= p {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) out of range for p = {p}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) has non-positive weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            out.push(Edge { u, v, w });
        }
        out.sort_by_key(|e| (e.u, e.v));
        if let Some(dup) = out
            .windows(2)
            .find(|e| e[0].u == e[1].u && e[0].v == e[1].v)
        {
            return Err(Error::InvalidGraph(format!(
                "edge ({},{}) appears more than once",
                dup[0].u, dup[0].v
            )));
        }
        let connected = is_connected(p, &out);
        Ok(Self {
            p,
            edges: out,
            connected,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.connected {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    /// Weighted degree of every vertex.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.p];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        d
    }

    /// Neighbor lists `(vertex, weight)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.p];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        adj
    }

    /// Combinatorial Laplacian `D - W` as a dense matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.p, self.p);
        for e in &self.edges {
            l[(e.u, e.u)] += e.w;
            l[(e.v, e.v)] += e.w;
            l[(e.u, e.v)] -= e.w;
            l[(e.v, e.u)] -= e.w;
        }
        l
    }

    /// Quadratic form `xᵀΔx = Σ_{(u,v)} w (x_u − x_v)²`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|e| e.w * (x[e.u] - x[e.v]).powi(2))
            .sum()
    }

    /// Hop-count diameter, ignoring weights. `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        if !self.connected {
            return None;
        }
        let adj = self.adjacency();
        let mut best = 0;
        for s in 0..self.p {
            let dist = bfs(&adj, s);
            best = best.max(dist.into_iter().flatten().max().unwrap_or(0));
        }
        Some(best)
    }
}

fn bfs(adj: &[Vec<(usize, f64)>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &(v, _) in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn is_connected(p: usize, edges: &[Edge]) -> bool {
    let mut adj = vec![Vec::new(); p];
    for e in edges {
        adj[e.u].push((e.v, e.w));
        adj[e.v].push((e.u, e.w));
    }
    bfs(&adj, 0).iter().all(Option::is_some)
}

/// A non-empty proper subset of the vertices, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexSet {
    members: Vec<usize>,
    p: usize,
}

impl VertexSet {
    pub fn new(p: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&m) = members.last() {
            if m >= p {
                return Err(invalid(
                    "vertex set",
                    format!("vertex {m} out of range for p = {p}"),
                ));
            }
        }
        if members.is_empty() || members.len() == p {
            return Err(Error::ImproperSet {
                size: members.len(),
                p,
            });
        }
        Ok(Self { members, p })
    }

    /// Decodes the set whose membership is given by the low `p` bits of `mask`.
    pub fn from_mask(p: usize, mask: u64) -> Result<Self> {
        Self::new(p, (0..p).filter(|&i| mask >> i & 1 == 1))
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn complement_len(&self) -> usize {
        self.p - self.members.len()
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.p];
        for &m in &self.members {
            ind[m] = true;
        }
        ind
    }

    pub fn complement(&self) -> VertexSet {
        let ind = self.indicator();
        VertexSet {
            members: (0..self.p).filter(|&i| !ind[i]).collect(),
            p: self.p,
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

fn check_set(g: &Graph, c: &VertexSet) -> Result<()> {
    if c.p() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: c.p(),
        });
    }
    Ok(())
}

/// Total weight of edges with exactly one endpoint in `c`.
pub fn cut_weight(g: &Graph, c: &VertexSet) -> Result<f64> {
    check_set(g, c)?;
    let ind = c.indicator();
    Ok(g.edges()
        .iter()
        .filter(|e| ind[e.u] != ind[e.v])
        .map(|e| e.w)
        .sum())
}

/// Cut sparsity `p·W(∂C) / (|C|·|C̄|)`.
pub fn cut_sparsity(g: &Graph, c: &VertexSet) -> Result<f64> {
    let cut = cut_weight(g, c)?;
    let p = g.p() as f64;
    Ok(p * cut / (c.len() as f64 * c.complement_len() as f64))
}

/// Complete binary tree of depth `depth` in heap order: vertex `i` has
/// children `2i+1` and `2i+2`.
pub fn balanced_binary_tree(depth: usize) -> Result<Graph> {
    if depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    if depth > 24 {
        return Err(invalid("depth", "at most 24"));
    }
    let p = (1usize << (depth + 1)) - 1;
    Graph::new(p, (1..p).map(|i| ((i - 1) / 2, i, 1.0)))
}

/// Vertices of the subtree rooted at `root` in a heap-ordered tree on `p` vertices.
pub fn bbt_subtree(p: usize, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if v < p {
            out.push(v);
            stack.push(2 * v + 1);
            stack.push(2 * v + 2);
        }
    }
    out.sort_unstable();
    out
}

/// The `side × side` torus; vertex `(r, c)` has index `r * side + c`.
pub fn torus(side: usize) -> Result<Graph> {
    if side < 3 {
        return Err(invalid("side", "torus needs side >= 3"));
    }
    let idx = |r: usize, c: usize| (r % side) * side + (c % side);
    let mut edges = Vec::with_capacity(2 * side * side);
    for r in 0..side {
        for c in 0..side {
            edges.push((idx(r, c), idx(r, c + 1), 1.0));
            edges.push((idx(r, c), idx(r + 1, c), 1.0));
        }
    }
    Graph::new(side * side, edges)
}

/// Multi-scale Kronecker power of a connected base graph.
///
/// Vertex `(i_1, …, i_ℓ)` has index `i_1·p₀^{ℓ−1} + … + i_ℓ`; coordinate 1 is
/// the coarsest. An edge changing coordinate `j` carries the base weight
/// times `p₀^{j−ℓ}`.
pub fn kronecker_graph(base: &Graph, levels: usize) -> Result<Graph> {
    if levels == 0 {
        return Err(invalid("levels", "must be at least 1"));
    }
    if !base.is_connected() {
        return Err(Error::InvalidGraph(
            "Kronecker base must be connected".into(),
        ));
    }
    let p0 = base.p();
    if p0 < 2 {
        return Err(invalid("base", "needs at least 2 vertices"));
    }
    let p = p0
        .checked_pow(levels as u32)
        .filter(|&p| p <= 1 << 22)
        .ok_or_else(|| invalid("levels", "graph too large"))?;
    let mut edges = Vec::new();
    for j in 1..=levels {
        let stride = p0.pow((levels - j) as u32);
        let scale = (p0 as f64).powi(j as i32 - levels as i32);
        for x in 0..p {
            let coord = (x / stride) % p0;
            for e in base.edges() {
                if e.u == coord {
                    let y = x - e.u * stride + e.v * stride;
                    edges.push((x, y, e.w * scale));
                }
            }
        }
    }
    Graph::new(p, edges)
}

/// kNN graph under the "or" rule: `i ~ j` iff either is among the other's
/// `k` nearest neighbors in Euclidean distance. Distance ties go to the
/// smaller index.
pub fn knn_graph(points: &[Vec<f64>], k: usize) -> Result<Graph> {
    let n = points.len();
    if n < 2 {
        return Err(invalid("points", "need at least 2 points"));
    }
    if k == 0 || k >= n {
        return Err(invalid("k", format!("need 1 <= k < {n}")));
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().position(|pt| pt.len() != dim) {
        return Err(invalid(
            "points",
            format!(
                "point {bad} has {} coordinates, expected {dim}",
                points[bad].len()
            ),
        ));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid("points", "coordinates must be finite"));
    }
    let dist2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum() };

    let mut pairs = HashMap::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(&points[i], &points[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            pairs.insert((i.min(j), i.max(j)), 1.0);
        }
    }
    Graph::new(n, pairs.into_iter().map(|((u, v), w)| (u, v, w)))
}

/// Path graph `0 − 1 − … − (p−1)` with unit weights.
pub fn path(p: usize) -> Result<Graph> {
    Graph::new(p, (1..p).map(|i| (i - 1, i, 1.0)))
}

/// Random connected graph: a random spanning tree plus each remaining pair
/// with probability `extra`, weights uniform in `[0.5, 2)`.
pub fn random_connected<R: Rng + ?Sized>(p: usize, extra: f64, rng: &mut R) -> Result<Graph> {
    let mut edges = HashMap::new();
    for v in 1..p {
        let u = rng.random_range(0..v);
        edges.insert((u, v), rng.random_range(0.5..2.0));
    }
    for u in 0..p {
        for v in u + 1..p {
            if !edges.contains_key(&(u, v)) && rng.random::<f64>() < extra {
                edges.insert((u, v), rng.random_range(0.5..2.0));
            }
        }
    }
    let mut list: Vec<_> = edges.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    list.sort_by_key(|e| (e.0, e.1));
    Graph::new(p, list)
}
