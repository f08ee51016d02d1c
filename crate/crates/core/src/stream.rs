//! Edge-stream data model: node interning, canonical edges, edge-list I/O and
//! the offline preprocessing passes (simplification, shuffling).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense node identifier assigned by first-appearance interning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Undirected edge stored in canonical order (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    a: NodeId,
    b: NodeId,
}

impl Edge {
    /// Canonicalizes `(u, v)`; self-loops are rejected.
    pub fn new(u: impl Into<NodeId>, v: impl Into<NodeId>) -> Result<Self> {
        let (u, v) = (u.into(), v.into());
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Ok(Edge { a: u, b: v }),
            std::cmp::Ordering::Greater => Ok(Edge { a: v, b: u }),
            std::cmp::Ordering::Equal => Err(Error::SelfLoop(u)),
        }
    }

    #[inline]
    pub fn a(self) -> NodeId {
        self.a
    }

    #[inline]
    pub fn b(self) -> NodeId {
        self.b
    }

    #[inline]
    pub fn endpoints(self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Free-function form of [`Edge::new`].
pub fn canonicalize_edge(u: NodeId, v: NodeId) -> Result<Edge> {
    Edge::new(u, v)
}

/// One arrival in a stream. `time` is the 1-based arrival index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamEvent {
    pub edge: Edge,
    pub time: u64,
}

/// Attaches arrival times `1, 2, ...` to a sequence of edges.
pub fn timed(edges: &[Edge]) -> impl Iterator<Item = StreamEvent> + '_ {
    edges
        .iter()
        .zip(1u64..)
        .map(|(&edge, time)| StreamEvent { edge, time })
}

/// Maps arbitrary input tokens to dense ids in order of first appearance.
#[derive(Debug, Clone, Default)]
pub struct NodeInterner {
    ids: HashMap<String, NodeId>,
    tokens: Vec<String>,
}

impl NodeInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> NodeId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = NodeId(u32::try_from(self.tokens.len()).expect("more than 2^32 nodes"));
        self.ids.insert(token.to_owned(), id);
        self.tokens.push(token.to_owned());
        id
    }

    pub fn get(&self, token: &str) -> Option<NodeId> {
        self.ids.get(token).copied()
    }

    /// Original token of `id`, or its numeric form for ids this interner
    /// never issued.
    pub fn token(&self, id: NodeId) -> std::borrow::Cow<'_, str> {
        match self.tokens.get(id.index()) {
            Some(t) => std::borrow::Cow::Borrowed(t.as_str()),
            None => std::borrow::Cow::Owned(id.0.to_string()),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parses one edge-list line: `u v [t]` separated by spaces or tabs.
///
/// Returns `Ok(None)` for blank lines and `#` comments. The pair is returned
/// raw (possibly a self-loop); canonicalization happens in preprocessing.
pub fn parse_edge_line(
    line: &str,
    line_no: usize,
    interner: &mut NodeInterner,
) -> Result<Option<(NodeId, NodeId)>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut fields = trimmed.split_ascii_whitespace();
    match (fields.next(), fields.next()) {
        (Some(u), Some(v)) => {
            let u = interner.intern(u);
            let v = interner.intern(v);
            Ok(Some((u, v)))
        }
        _ => Err(Error::Parse {
            line: line_no,
            message: format!("expected at least two fields, got {trimmed:?}"),
        }),
    }
}

/// An edge list as read from a file, before any preprocessing.
#[derive(Debug, Clone, Default)]
pub struct RawStream {
    pub interner: NodeInterner,
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl RawStream {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut interner = NodeInterner::new();
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(pair) = parse_edge_line(&line, i + 1, &mut interner)? {
                pairs.push(pair);
            }
        }
        Ok(RawStream { interner, pairs })
    }
}

/// Removes self-loops and duplicate edges, keeping the first occurrence of
/// each canonical edge in arrival order.
pub fn preprocess_simple<I>(pairs: I) -> Vec<Edge>
where
    I: IntoIterator<Item = (NodeId, NodeId)>,
{
    let mut seen = HashSet::new();
    pairs
        .into_iter()
        .filter_map(|(u, v)| Edge::new(u, v).ok())
        .filter(|e| seen.insert(*e))
        .collect()
}

/// Removes self-loops and canonicalizes; duplicates are retained in order.
pub fn preprocess_multi<I>(pairs: I) -> Vec<Edge>
where
    I: IntoIterator<Item = (NodeId, NodeId)>,
{
    pairs
        .into_iter()
        .filter_map(|(u, v)| Edge::new(u, v).ok())
        .collect()
}

/// Seeded Fisher–Yates permutation of the stream.
pub fn shuffle_stream(mut events: Vec<Edge>, seed: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);
    events
}

/// Exact number of distinct canonical edges.
pub fn distinct_edge_count<'a, I>(events: I) -> usize
where
    I: IntoIterator<Item = &'a Edge>,
{
    events.into_iter().collect::<HashSet<_>>().len()
}

/// Basic size statistics of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamStats {
    pub nodes: usize,
    pub edges: usize,
    pub distinct: usize,
}

impl StreamStats {
    pub fn of(edges: &[Edge]) -> Self {
        let nodes: HashSet<NodeId> = edges.iter().flat_map(|e| [e.a(), e.b()]).collect();
        StreamStats {
            nodes: nodes.len(),
            edges: edges.len(),
            distinct: distinct_edge_count(edges),
        }
    }
}

impl fmt::Display for StreamStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes={} edges={} distinct={}",
            self.nodes, self.edges, self.distinct
        )
    }
}

/// Writes edges as `u v` lines using the original tokens.
pub fn write_edge_list<W: Write>(
    mut out: W,
    edges: &[Edge],
    interner: &NodeInterner,
) -> Result<()> {
    for e in edges {
        writeln!(out, "{} {}", interner.token(e.a()), interner.token(e.b()))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(v: u32) -> NodeId {
        NodeId(v)
    }

    fn e(u: u32, v: u32) -> Edge {
        Edge::new(u, v).unwrap()
    }

    #[test]
    fn canonical_order() {
        assert_eq!(
            canonicalize_edge(n(5), n(2)).unwrap().endpoints(),
            (n(2), n(5))
        );
        assert_eq!(
            canonicalize_edge(n(2), n(5)).unwrap().endpoints(),
            (n(2), n(5))
        );
        assert!(matches!(
            canonicalize_edge(n(3), n(3)),
            Err(Error::SelfLoop(_))
        ));
    }

    #[test]
    fn parse_lines() {
        let mut interner = NodeInterner::new();
        let (u, v) = parse_edge_line("12 7", 1, &mut interner).unwrap().unwrap();
        assert_eq!(interner.token(u), "12");
        assert_eq!(interner.token(v), "7");
        let edge = Edge::new(u, v).unwrap();
        assert_eq!(
            edge,
            Edge::new(interner.get("7").unwrap(), interner.get("12").unwrap()).unwrap()
        );

        assert!(parse_edge_line("# comment", 2, &mut interner)
            .unwrap()
            .is_none());
        assert!(parse_edge_line("   ", 3, &mut interner).unwrap().is_none());
        // trailing timestamp is accepted and ignored
        assert!(parse_edge_line("1\t2\t99", 4, &mut interner)
            .unwrap()
            .is_some());
        match parse_edge_line("12", 5, &mut interner) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn interning_is_deterministic() {
        let text = "a b\nc a 5\n# x\nb c\n";
        let r1 = RawStream::read(text.as_bytes()).unwrap();
        let r2 = RawStream::read(text.as_bytes()).unwrap();
        assert_eq!(r1.pairs, r2.pairs);
        assert_eq!(r1.interner.get("c"), Some(NodeId(2)));
    }

    #[test]
    fn simplification() {
        let input = vec![
            (n(1), n(2)),
            (n(2), n(1)),
            (n(1), n(2)),
            (n(3), n(3)),
            (n(2), n(3)),
        ];
        assert_eq!(preprocess_simple(input), vec![e(1, 2), e(2, 3)]);
        assert!(preprocess_simple(Vec::new()).is_empty());
        assert_eq!(preprocess_simple(vec![(n(1), n(2))]), vec![e(1, 2)]);
    }

    #[test]
    fn multigraph_preprocessing() {
        let input = vec![(n(1), n(2)), (n(2), n(1)), (n(3), n(3))];
        assert_eq!(preprocess_multi(input), vec![e(1, 2), e(1, 2)]);
        assert_eq!(preprocess_multi(vec![(n(1), n(2))]), vec![e(1, 2)]);
        assert!(preprocess_multi(Vec::new()).is_empty());
    }

    #[test]
    fn distinct_counting() {
        assert_eq!(distinct_edge_count(&[e(1, 2), e(1, 2), e(2, 3)]), 2);
        assert_eq!(distinct_edge_count(&[]), 0);
        let k: Vec<Edge> = (1..=7).map(|i| e(0, i)).collect();
        let repeated: Vec<Edge> = k.iter().flat_map(|&x| [x; 4]).collect();
        assert_eq!(distinct_edge_count(&repeated), 7);
    }

    #[test]
    fn shuffle_basics() {
        assert_eq!(shuffle_stream(vec![e(1, 2)], 17), vec![e(1, 2)]);
        let s: Vec<Edge> = (1..50).map(|i| e(0, i)).collect();
        assert_eq!(shuffle_stream(s.clone(), 3), shuffle_stream(s.clone(), 3));
        assert_ne!(shuffle_stream(s.clone(), 3), shuffle_stream(s, 4));
    }

    #[test]
    fn shuffle_is_uniform_over_permutations() {
        // Chi-square over the 6 orderings of 3 edges, 10,000 seeds.
        let base = vec![e(1, 2), e(2, 3), e(1, 3)];
        let mut counts: HashMap<Vec<Edge>, u64> = HashMap::new();
        let trials = 10_000u64;
        for seed in 0..trials {
            *counts
                .entry(shuffle_stream(base.clone(), seed))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for c in counts.values() {
            let freq = *c as f64 / trials as f64;
            assert!((freq - p).abs() <= 3.0 * se, "freq {freq}");
        }
        let expected = trials as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 5 degrees of freedom, alpha = 0.01
        assert!(chi2 < 15.086, "chi2 = {chi2}");
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "x y\ny z 3\nz x\nx x\n";
        let raw = RawStream::read(text.as_bytes()).unwrap();
        let edges = preprocess_simple(raw.pairs.iter().copied());
        let mut out = Vec::new();
        write_edge_list(&mut out, &edges, &raw.interner).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x y\ny z\nx z\n");
        assert_eq!(
            StreamStats::of(&edges).to_string(),
            "nodes=3 edges=3 distinct=3"
        );
    }

    fn pairs_strategy() -> impl Strategy<Value = Vec<(NodeId, NodeId)>> {
        prop::collection::vec((0u32..12, 0u32..12), 0..80)
            .prop_map(|v| v.into_iter().map(|(a, b)| (NodeId(a), NodeId(b))).collect())
    }

    proptest! {
        #[test]
        fn simple_is_idempotent(pairs in pairs_strategy()) {
            let once = preprocess_simple(pairs);
            let twice = preprocess_simple(once.iter().map(|e| e.endpoints()));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn distinct_of_multi_equals_simple_len(pairs in pairs_strategy()) {
            let multi = preprocess_multi(pairs.clone());
            prop_assert_eq!(distinct_edge_count(&multi), preprocess_simple(pairs).len());
        }

        #[test]
        fn shuffle_is_a_permutation(pairs in pairs_strategy(), seed in any::<u64>()) {
            let edges = preprocess_multi(pairs);
            let mut shuffled = shuffle_stream(edges.clone(), seed);
            let mut sorted = edges;
            shuffled.sort();
            sorted.sort();
            prop_assert_eq!(shuffled, sorted);
        }
    }
}
