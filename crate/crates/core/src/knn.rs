//! K-nearest-neighbour graphs over 3D points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{bounding_box_diagonal, PointCloud};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Distances are floored at this fraction of the bounding-box diagonal
/// before inversion, so duplicate points get a large finite weight.
pub const DISTANCE_FLOOR: f64 = 1e-9;

/// Above this many points, [`KnnSearch::Auto`] switches to bounded search.
pub const EXACT_SEARCH_LIMIT: usize = 100_000;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KnnSearch {
    #[default]
    Auto,
    Exact,
    /// Stops after visiting `max_leaves` kd-tree leaves per query.
    Approximate { max_leaves: usize },
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over borrowed points.
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = points[self.order[mid]][axis];
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Split { axis, value, left, right };
        slot
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for d in 0..3 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0)
    }

    /// The `k` nearest points to `points[query]`, excluding the query itself,
    /// ordered by `(squared distance, index)`.
    pub fn nearest(&self, query: usize, k: usize, max_leaves: Option<usize>) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let mut leaves = 0usize;
        if !self.nodes.is_empty() {
            self.search(0, query, k, &mut best, &mut leaves, max_leaves.unwrap_or(usize::MAX));
        }
        best
    }

    fn search(
        &self,
        node: usize,
        query: usize,
        k: usize,
        best: &mut Vec<(f64, usize)>,
        leaves: &mut usize,
        max_leaves: usize,
    ) {
        if *leaves >= max_leaves {
            return;
        }
        let q = self.points[query];
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                *leaves += 1;
                for &i in &self.order[start..end] {
                    if i == query {
                        continue;
                    }
                    let cand = (squared_distance(&q, &self.points[i]), i);
                    if best.len() < k || cmp_candidate(&cand, best.last().expect("nonempty")).is_lt() {
                        let pos = best.partition_point(|c| cmp_candidate(c, &cand).is_lt());
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, best, leaves, max_leaves);
                if best.len() < k || diff * diff <= best.last().expect("nonempty").0 {
                    self.search(far, query, k, best, leaves, max_leaves);
                }
            }
        }
    }
}

fn cmp_candidate(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum()
}

/// Edge weight `1 / max(‖v_i − v_j‖, floor)`, evaluated in canonical
/// `(min, max)` order so both endpoints produce the same bits.
pub fn edge_weight(points: &[[f64; 3]], i: usize, j: usize, floor: f64) -> f64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    1.0 / squared_distance(&points[a], &points[b]).sqrt().max(floor)
}

pub fn distance_floor(points: &[[f64; 3]]) -> f64 {
    let diag = bounding_box_diagonal(points);
    DISTANCE_FLOOR * if diag > 0.0 { diag } else { 1.0 }
}

/// Symmetric KNN graph: `i ~ j` when either is among the other's `k`
/// nearest neighbours, weighted by inverse distance.
pub fn knn_graph(pc: &PointCloud, k: usize) -> Result<Graph> {
    knn_graph_with(&pc.positions, k, KnnSearch::Auto)
}

pub fn knn_graph_with(points: &[[f64; 3]], k: usize, search: KnnSearch) -> Result<Graph> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if n <= k {
        return Err(Error::InvalidArgument(format!("knn needs n > k, got n = {n}, k = {k}")));
    }
    let max_leaves = match search {
        KnnSearch::Exact => None,
        KnnSearch::Approximate { max_leaves } => Some(max_leaves.max(1)),
        KnnSearch::Auto if n > EXACT_SEARCH_LIMIT => Some(32),
        KnnSearch::Auto => None,
    };
    let tree = KdTree::new(points);
    let neighbours: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| tree.nearest(i, k, max_leaves))
        .collect();

    let floor = distance_floor(points);
    let mut pairs: Vec<(usize, usize)> = neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&(_, j)| if i < j { (i, j) } else { (j, i) }))
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, edge_weight(points, i, j, floor)))
        .collect();
    Graph::from_edges(n, &edges)
}
