//! Weighted undirected graphs, vertex bipartitions, and the two Laplacians.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::SparseSym;

/// Weighted undirected graph with nonnegative weights and no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: SparseSym,
}

impl Graph {
    pub fn new(adjacency: SparseSym) -> Result<Self> {
        for (i, j, w) in adjacency.entries() {
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
        }
        Ok(Self { adjacency })
    }

    /// Edges listed once each; duplicates are summed.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(SparseSym::from_triplets(n, edges.iter().copied())?)
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn adjacency(&self) -> &SparseSym {
        &self.adjacency
    }

    /// Edges as `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.entries().filter(|&(i, j, _)| i < j)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.adjacency.row(i).map(|(_, w)| w).sum())
            .collect()
    }

    /// Component label per vertex (labels numbered by smallest member) and
    /// the number of components.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        components_of(&self.adjacency)
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().1 == 1
    }

    pub fn isolated_vertices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.adjacency.row(i).next().is_none())
            .collect()
    }

    /// True when every edge crosses the cut of `p`.
    pub fn is_bipartite_on(&self, p: &Partition) -> bool {
        self.edges().all(|(i, j, _)| p.in_a(i) != p.in_a(j))
    }
}

/// Connected components of the off-diagonal sparsity pattern.
pub(crate) fn components_of(m: &SparseSym) -> (Vec<usize>, usize) {
    let n = m.n();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for (u, _) in m.row(v) {
                if label[u] == usize::MAX {
                    label[u] = count;
                    stack.push(u);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Two-set partition of the vertices with indicator `f_i = +1` on A and
/// `-1` on B. Both sides are nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    in_a: Vec<bool>,
}

impl Partition {
    pub fn new(in_a: Vec<bool>) -> Result<Self> {
        let a = in_a.iter().filter(|&&x| x).count();
        if a == 0 || a == in_a.len() {
            return Err(Error::InvalidPartition(format!(
                "|A| = {a}, |B| = {}; both sides must be nonempty",
                in_a.len() - a
            )));
        }
        Ok(Self { in_a })
    }

    pub fn from_a_set(n: usize, a: &[usize]) -> Result<Self> {
        let mut in_a = vec![false; n];
        for &i in a {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            in_a[i] = true;
        }
        Self::new(in_a)
    }

    pub fn from_indicator(f: &[i8]) -> Result<Self> {
        let in_a = f
            .iter()
            .map(|&v| match v {
                1 => Ok(true),
                -1 => Ok(false),
                other => Err(Error::InvalidPartition(format!("indicator value {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(in_a)
    }

    pub fn n(&self) -> usize {
        self.in_a.len()
    }

    pub fn in_a(&self, i: usize) -> bool {
        self.in_a[i]
    }

    pub fn indicator(&self) -> Vec<i8> {
        self.in_a.iter().map(|&a| if a { 1 } else { -1 }).collect()
    }

    pub fn a_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.in_a[i]).collect()
    }

    pub fn b_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.in_a[i]).collect()
    }

    pub fn a_len(&self) -> usize {
        self.in_a.iter().filter(|&&x| x).count()
    }

    pub fn b_len(&self) -> usize {
        self.n() - self.a_len()
    }

    /// `J x` with `J = diag(f)`.
    pub fn apply_j(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.in_a)
            .map(|(&v, &a)| if a { v } else { -v })
            .collect()
    }

    /// `(x_A, x_B)` with entries in ascending vertex order.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(self.a_len());
        let mut b = Vec::with_capacity(self.b_len());
        for (&v, &in_a) in x.iter().zip(&self.in_a) {
            if in_a {
                a.push(v);
            } else {
                b.push(v);
            }
        }
        (a, b)
    }

    /// Inverse of [`Partition::split`].
    pub fn merge(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.a_len() {
            return Err(Error::DimensionMismatch {
                expected: self.a_len(),
                got: a.len(),
            });
        }
        if b.len() != self.b_len() {
            return Err(Error::DimensionMismatch {
                expected: self.b_len(),
                got: b.len(),
            });
        }
        let (mut ia, mut ib) = (a.iter(), b.iter());
        Ok(self
            .in_a
            .iter()
            .map(|&in_a| *if in_a { ia.next() } else { ib.next() }.expect("lengths checked"))
            .collect())
    }
}

/// i.i.d. fair membership per vertex, redrawn whole until both sides are
/// nonempty.
pub fn random_partition(n: usize, seed: u64) -> Result<Partition> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("partition needs n >= 2, got {n}")));
    }
    let mut rng = rng::stream(seed, "partition", 0);
    loop {
        let in_a: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if let Ok(p) = Partition::new(in_a) {
            return Ok(p);
        }
    }
}

/// [`random_partition`], then every connected component of `g` that landed
/// entirely on one side is redrawn until it is split. Components of a single
/// vertex are left as drawn.
///
/// A component of `g` lying inside A makes the A block of the Laplacian
/// singular, so this is what keeps the block-diagonal inner product
/// positive definite on disconnected graphs.
pub fn random_partition_per_component(g: &Graph, seed: u64) -> Result<Partition> {
    let base = random_partition(g.n(), seed)?;
    let (label, count) = g.connected_components();
    if count == 1 {
        return Ok(base);
    }
    let mut members = vec![Vec::new(); count];
    for (v, &c) in label.iter().enumerate() {
        members[c].push(v);
    }
    let mut in_a = base.in_a;
    let mut rng = rng::stream(seed, "partition-component", 0);
    for comp in members.iter().filter(|m| m.len() >= 2) {
        while comp.iter().all(|&v| in_a[v]) || comp.iter().all(|&v| !in_a[v]) {
            for &v in comp {
                in_a[v] = rng.random::<bool>();
            }
        }
    }
    Partition::new(in_a)
}

/// `L = D − W`.
pub fn combinatorial_laplacian(g: &Graph) -> SparseSym {
    let degrees = g.degrees();
    let triplets = g
        .edges()
        .map(|(i, j, w)| (i, j, -w))
        .chain(degrees.iter().enumerate().map(|(i, &d)| (i, i, d)));
    SparseSym::from_triplets(g.n(), triplets.collect::<Vec<_>>()).expect("graph indices are valid")
}

/// `𝓛 = I − D^{-1/2} W D^{-1/2}`; fails on a vertex with zero degree.
pub fn normalized_laplacian(g: &Graph) -> Result<SparseSym> {
    let degrees = g.degrees();
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    Ok(normalized_from_degrees(g, &degrees))
}

/// Like [`normalized_laplacian`], but an isolated vertex gets the identity
/// row (`𝓛_ii = 1`, no off-diagonal entries). Used for bipartized graphs,
/// where isolated vertices are expected.
pub fn normalized_laplacian_allow_isolated(g: &Graph) -> SparseSym {
    normalized_from_degrees(g, &g.degrees())
}

fn normalized_from_degrees(g: &Graph, degrees: &[f64]) -> SparseSym {
    let triplets = g
        .edges()
        .map(|(i, j, w)| (i, j, -w / (degrees[i] * degrees[j]).sqrt()))
        .chain((0..g.n()).map(|i| (i, i, 1.0)));
    SparseSym::from_triplets(g.n(), triplets.collect::<Vec<_>>()).expect("graph indices are valid")
}

/// Keeps only the edges between A and B.
pub fn bipartize(g: &Graph, p: &Partition) -> Result<Graph> {
    if p.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: p.n(),
        });
    }
    let edges: Vec<_> = g.edges().filter(|&(i, j, _)| p.in_a(i) != p.in_a(j)).collect();
    Graph::from_edges(g.n(), &edges)
}
