//! Exact local triangle counts, the ground truth for evaluation.
//!
//! Triangles are enumerated once each by orienting every edge from the
//! lower-ranked to the higher-ranked endpoint (rank = degree, then id) and
//! intersecting sorted forward-adjacency lists.

use std::collections::HashMap;

use crate::counts::LocalCounts;
use crate::stream::{Edge, NodeId};

/// Calls `f(u, v, w, [uv, uw, vw])` once per triangle of the distinct edge
/// set, where the edge arguments are the canonical triangle edges.
fn for_each_triangle<F>(distinct: &[Edge], mut f: F)
where
    F: FnMut(NodeId, NodeId, NodeId, [Edge; 3]),
{
    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for e in distinct {
        *degree.entry(e.a()).or_default() += 1;
        *degree.entry(e.b()).or_default() += 1;
    }
    let rank = |u: NodeId| (degree[&u], u);
    let mut forward: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for e in distinct {
        let (lo, hi) = if rank(e.a()) < rank(e.b()) {
            (e.a(), e.b())
        } else {
            (e.b(), e.a())
        };
        forward.entry(lo).or_default().push(hi);
    }
    for list in forward.values_mut() {
        list.sort_unstable_by_key(|&x| rank(x));
    }
    let mut sources: Vec<NodeId> = forward.keys().copied().collect();
    sources.sort_unstable();
    for u in sources {
        let nu = &forward[&u];
        for &v in nu {
            let Some(nv) = forward.get(&v) else { continue };
            // Both lists are sorted by rank; merge-intersect.
            let (mut i, mut j) = (0, 0);
            while i < nu.len() && j < nv.len() {
                match rank(nu[i]).cmp(&rank(nv[j])) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let w = nu[i];
                        let edges = [
                            Edge::new(u, v).expect("distinct endpoints"),
                            Edge::new(u, w).expect("distinct endpoints"),
                            Edge::new(v, w).expect("distinct endpoints"),
                        ];
                        f(u, v, w, edges);
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
}

fn zero_counts<'a, I: IntoIterator<Item = &'a Edge>>(edges: I) -> LocalCounts {
    edges
        .into_iter()
        .flat_map(|e| [(e.a(), 0.0), (e.b(), 0.0)])
        .collect()
}

/// Exact local triangle counts of a simple graph. Every endpoint appears in
/// the result, including nodes in no triangle.
pub fn exact_local_simple(edges: &[Edge]) -> LocalCounts {
    let mut distinct = edges.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut counts = zero_counts(&distinct);
    for_each_triangle(&distinct, |u, v, w, _| {
        counts.add(u, 1.0);
        counts.add(v, 1.0);
        counts.add(w, 1.0);
    });
    counts
}

/// Binary counting over a multigraph stream: multiplicities are ignored.
pub fn exact_local_binary(stream: &[Edge]) -> LocalCounts {
    exact_local_simple(stream)
}

/// Weighted counting: each triangle contributes the product of its three
/// edge multiplicities (over the whole stream) to each of its nodes.
pub fn exact_local_weighted(stream: &[Edge]) -> LocalCounts {
    let mut multiplicity: HashMap<Edge, u64> = HashMap::new();
    for &e in stream {
        *multiplicity.entry(e).or_default() += 1;
    }
    let mut distinct: Vec<Edge> = multiplicity.keys().copied().collect();
    distinct.sort_unstable();
    let mut counts = zero_counts(&distinct);
    for_each_triangle(&distinct, |u, v, w, edges| {
        let weight = edges.iter().map(|e| multiplicity[e]).product::<u64>() as f64;
        counts.add(u, weight);
        counts.add(v, weight);
        counts.add(w, weight);
    });
    counts
}

/// Distinct-neighbor degree of every node in the stream.
pub fn degrees(stream: &[Edge]) -> HashMap<NodeId, usize> {
    let mut distinct = stream.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut degree = HashMap::new();
    for e in distinct {
        *degree.entry(e.a()).or_default() += 1;
        *degree.entry(e.b()).or_default() += 1;
    }
    degree
}
