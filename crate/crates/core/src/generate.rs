//! Seeded random graphs for verification batteries.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::knn::{knn_graph_with, KnnSearch};
use crate::rng;

/// Weights are drawn uniformly from this range.
const WEIGHT_RANGE: std::ops::Range<f64> = 0.1..2.0;

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(WEIGHT_RANGE)
}

/// Erdős–Rényi `G(n, p)` with random weights. Components are chained
/// together with one extra edge each so the result is connected.
pub fn erdos_renyi_connected(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} not in [0, 1]")));
    }
    let mut rng = rng::stream(seed, "erdos-renyi", 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j, weight(&mut rng)));
            }
        }
    }
    let g = Graph::from_edges(n, &edges)?;
    let (labels, count) = g.connected_components();
    if count == 1 {
        return Ok(g);
    }
    let mut members = vec![Vec::new(); count];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    for pair in members.windows(2) {
        let u = *pair[0].choose(&mut rng).expect("component is nonempty");
        let v = *pair[1].choose(&mut rng).expect("component is nonempty");
        edges.push((u.min(v), u.max(v), weight(&mut rng)));
    }
    Graph::from_edges(n, &edges)
}

/// KNN graph on uniform random points in the unit cube, redrawn until it
/// is connected.
pub fn knn_connected(n: usize, k: usize, seed: u64) -> Result<Graph> {
    for attempt in 0..1000 {
        let mut rng = rng::stream(seed, "knn-points", attempt);
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let g = knn_graph_with(&points, k, KnnSearch::Exact)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no connected {k}-NN graph on {n} points after 1000 draws"
    )))
}

/// Connected bipartite graph with sides of size `n_a` and `n_b`: a random
/// spanning tree across the sides plus each remaining A–B edge with
/// probability `p`. Returns the graph and its two-colouring.
pub fn random_bipartite(n_a: usize, n_b: usize, p: f64, seed: u64) -> Result<(Graph, Partition)> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::InvalidArgument("both sides need at least one vertex".into()));
    }
    let n = n_a + n_b;
    let mut rng = rng::stream(seed, "bipartite", 0);
    let mut in_a = vec![true; n_a];
    in_a.extend(vec![false; n_b]);
    in_a.shuffle(&mut rng);
    let partition = Partition::new(in_a)?;
    let a = partition.a_indices();
    let b = partition.b_indices();

    let mut linked = std::collections::BTreeSet::new();
    // Grow a tree: every new vertex attaches to an already placed vertex on
    // the other side.
    let (mut placed_a, mut placed_b) = (vec![a[0]], vec![b[0]]);
    linked.insert((a[0].min(b[0]), a[0].max(b[0])));
    for &u in &a[1..] {
        let v = *placed_b.choose(&mut rng).expect("nonempty");
        linked.insert((u.min(v), u.max(v)));
        placed_a.push(u);
    }
    for &u in &b[1..] {
        let v = *placed_a.choose(&mut rng).expect("nonempty");
        linked.insert((u.min(v), u.max(v)));
        placed_b.push(u);
    }
    for &u in &a {
        for &v in &b {
            if rng.random_bool(p) {
                linked.insert((u.min(v), u.max(v)));
            }
        }
    }
    let edges: Vec<_> = linked.into_iter().map(|(u, v)| (u, v, weight(&mut rng))).collect();
    Ok((Graph::from_edges(n, &edges)?, partition))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_connected_and_seeded() {
        for seed in 0..20 {
            let g = erdos_renyi_connected(40, 0.02, seed).unwrap();
            assert!(g.is_connected());
            assert_eq!(g, erdos_renyi_connected(40, 0.02, seed).unwrap());
            assert!(knn_connected(60, 4, seed).unwrap().is_connected());
            let (b, p) = random_bipartite(7, 12, 0.2, seed).unwrap();
            assert!(b.is_connected() && b.is_bipartite_on(&p));
            assert_eq!((p.a_len(), p.b_len()), (7, 12));
        }
    }
}
