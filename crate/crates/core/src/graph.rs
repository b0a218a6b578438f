//! Weighted undirected communication graphs.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::linalg::{self, ComplementBasis, LinalgError, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge {index} ({i}, {j}) references a node outside 0..{n}")]
    NodeOutOfRange { index: usize, i: usize, j: usize, n: usize },
    #[error("edge {index} is a self-loop on node {node}")]
    SelfLoop { index: usize, node: usize },
    #[error("edge {index} duplicates the pair ({i}, {j})")]
    DuplicateEdge { index: usize, i: usize, j: usize },
    #[error("edge {index} has non-positive or non-finite weight {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("algebraic connectivity needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("complement basis has n = {basis}, graph has n = {graph}")]
    DimensionMismatch { basis: usize, graph: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Undirected edge `i < j` with weight `a_ij > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected weighted graph kept as an edge list.
///
/// Edge order is preserved as given; neighbor sums iterate in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Endpoints are stored as `(min, max)`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (index, (a, b, weight)) in edges.into_iter().enumerate() {
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange { index, i: a, j: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop { index, node: a });
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(GraphError::BadWeight { index, weight });
            }
            let (i, j) = (a.min(b), a.max(b));
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge { index, i, j });
            }
            out.push(Edge { i, j, weight });
        }
        Ok(Self { n, edges: out })
    }

    /// Complete graph with a uniform weight.
    pub fn complete(n: usize, weight: f64) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, weight))))
    }

    pub fn path(n: usize, weight: f64) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|i| (i - 1, i, weight)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbor lists `(j, a_ij)` per node, in edge-list order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        adj
    }

    /// Same graph with every weight multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self, GraphError> {
        Self::new(self.n, self.edges.iter().map(|e| (e.i, e.j, e.weight * s)))
    }
}

/// `L_ii = sum_j a_ij`, `L_ij = -a_ij`.
pub fn laplacian(g: &Graph) -> SymMatrix {
    let n = g.n;
    let mut entries = vec![0.0; n * n];
    for e in &g.edges {
        entries[e.i * n + e.j] -= e.weight;
        entries[e.j * n + e.i] -= e.weight;
        entries[e.i * n + e.i] += e.weight;
        entries[e.j * n + e.j] += e.weight;
    }
    SymMatrix::from_row_major(n, &entries).expect("graph has n >= 1 and finite weights")
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &Graph) -> bool {
    let adj = g.adjacency();
    let mut visited = vec![false; g.n];
    let mut queue = VecDeque::from([0]);
    visited[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == g.n
}

/// Second-smallest Laplacian eigenvalue.
///
/// Values within `1e-10 * (1 + ||L||_F)` of zero are reported as exactly zero,
/// so `λ₂ > 0` coincides with connectivity.
pub fn algebraic_connectivity(g: &Graph) -> Result<f64, GraphError> {
    if g.n < 2 {
        return Err(GraphError::TooFewNodes(g.n));
    }
    let l = laplacian(g);
    let eig = linalg::sym_eigen(&l)?;
    let lambda2 = eig.eigenvalues[1];
    if lambda2.abs() <= 1e-10 * (1.0 + l.frobenius_norm()) {
        Ok(0.0)
    } else {
        Ok(lambda2.max(0.0))
    }
}

/// `L̄ = U1^T L U1`, the Laplacian restricted to the disagreement subspace.
pub fn reduced_laplacian(g: &Graph, u1: &ComplementBasis) -> Result<SymMatrix, GraphError> {
    if u1.n() != g.n {
        return Err(GraphError::DimensionMismatch { basis: u1.n(), graph: g.n });
    }
    Ok(laplacian(g).congruence(u1.columns())?)
}
