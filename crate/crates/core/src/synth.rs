//! Seeded synthetic graph streams used as fixtures.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stream::{shuffle_stream, Edge};

fn edge(u: u32, v: u32) -> Edge {
    Edge::new(u, v).expect("generators never emit self-loops")
}

/// G(n, p) on nodes `0..n`, edges in lexicographic order.
pub fn erdos_renyi(n: u32, p: f64, seed: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                out.push(edge(u, v));
            }
        }
    }
    out
}

/// Barabási–Albert style preferential attachment: starts from a clique on
/// `per_node + 1` nodes, then each new node links to `per_node` distinct
/// existing nodes chosen proportionally to degree. Edges are returned in
/// generation order.
pub fn preferential_attachment(n: u32, per_node: u32, seed: u64) -> Vec<Edge> {
    assert!(per_node >= 1 && n > per_node);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    // Each edge endpoint appears once here, so uniform picks are degree-biased.
    let mut endpoints: Vec<u32> = Vec::new();
    for u in 0..=per_node {
        for v in u + 1..=per_node {
            out.push(edge(u, v));
            endpoints.extend([u, v]);
        }
    }
    for u in per_node + 1..n {
        let mut targets = HashSet::new();
        while targets.len() < per_node as usize {
            targets.insert(endpoints[rng.random_range(0..endpoints.len())]);
        }
        let mut targets: Vec<u32> = targets.into_iter().collect();
        targets.sort_unstable();
        for v in targets {
            out.push(edge(u, v));
            endpoints.extend([u, v]);
        }
    }
    out
}

/// Repeats every edge between 1 and `max_multiplicity` times (uniformly) and
/// shuffles the result.
pub fn duplicate(edges: &[Edge], max_multiplicity: u32, seed: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &e in edges {
        let r = rng.random_range(1..=max_multiplicity);
        out.extend(std::iter::repeat_n(e, r as usize));
    }
    out.shuffle(&mut rng);
    out
}

/// Star with `center` joined to `leaves` consecutive nodes.
pub fn star(center: u32, leaves: std::ops::Range<u32>) -> Vec<Edge> {
    leaves
        .filter(|&l| l != center)
        .map(|l| edge(center, l))
        .collect()
}

pub fn clique(nodes: &[u32]) -> Vec<Edge> {
    let mut out = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            out.push(edge(a, b));
        }
    }
    out
}

/// Sparse random background with a near-clique planted on `clique_nodes`:
/// each clique pair is kept with probability `density`. Result is shuffled
/// and deduplicated.
pub fn planted_near_clique(
    background: &[Edge],
    clique_nodes: &[u32],
    density: f64,
    seed: u64,
) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Edge> = background.iter().copied().collect();
    let mut out = background.to_vec();
    for e in clique(clique_nodes) {
        if rng.random::<f64>() < density && seen.insert(e) {
            out.push(e);
        }
    }
    shuffle_stream(out, seed.wrapping_add(1))
}

/// The bundled benchmark graph: ~5,000 nodes, ~50,000 edges, preferential
/// attachment, presented in a fixed random order.
pub fn bundled_pa_graph() -> Vec<Edge> {
    shuffle_stream(preferential_attachment(5_000, 10, 0x5eed), 0x0dde)
}

/// Duplicated variant of [`bundled_pa_graph`] (multiplicities 1..=5).
pub fn bundled_pa_multigraph() -> Vec<Edge> {
    duplicate(&bundled_pa_graph(), 5, 0xd0b1e)
}
