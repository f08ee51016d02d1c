//! Fixed-capacity edge reservoir with an adjacency index.
//!
//! Two replacement policies are supported. Uniform replacement is classic
//! reservoir sampling over a slot array: at time `T > M` the arriving edge
//! takes a uniformly drawn slot `i ∈ [1, T]` if `i ≤ M`. Min-hash replacement
//! keeps the `M` distinct edges with the smallest [`hash01`] values seen so
//! far, which samples distinct edges uniformly regardless of how often each
//! one repeats.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::stream::{Edge, NodeId};

const HASH_BITS: u32 = 52;
const HASH_SCALE: f64 = (1u64 << HASH_BITS) as f64;

/// Hash of an edge mapped into the open interval `(0, 1)`.
///
/// Stored as the top 52 bits of a 64-bit avalanche hash so that the integer
/// order and the `f64` order coincide exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeHash(u64);

impl EdgeHash {
    #[inline]
    pub fn value(self) -> f64 {
        (self.0 as f64 + 0.5) / HASH_SCALE
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed 64-bit avalanche hash of a canonical edge.
#[inline]
pub fn edge_hash64(e: Edge, hash_seed: u64) -> u64 {
    let key = mix64(hash_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let packed = ((e.a().0 as u64) << 32) | e.b().0 as u64;
    mix64(mix64(packed ^ key).wrapping_add(key))
}

/// Deterministic hash of `e` in `(0, 1)`; duplicates of an edge hash equal.
#[inline]
pub fn hash01(e: Edge, hash_seed: u64) -> EdgeHash {
    EdgeHash(edge_hash64(e, hash_seed) >> (64 - HASH_BITS))
}

#[derive(Debug, Clone)]
enum Policy {
    Uniform {
        slots: Vec<Edge>,
    },
    MinHash {
        hash_seed: u64,
        by_hash: BTreeMap<EdgeHash, Edge>,
    },
}

#[derive(Debug, Clone)]
pub struct SampleBuffer {
    capacity: usize,
    /// Buffered edges with their occurrence counts `O_e`.
    occurrence: FxHashMap<Edge, u64>,
    adjacency: FxHashMap<NodeId, Vec<NodeId>>,
    policy: Policy,
}

impl SampleBuffer {
    /// Buffer with uniform (slot) replacement.
    pub fn uniform(capacity: usize) -> Self {
        Self::with_policy(capacity, Policy::Uniform { slots: Vec::new() })
    }

    /// Buffer with min-hash replacement keyed by `hash_seed`.
    pub fn min_hash(capacity: usize, hash_seed: u64) -> Self {
        Self::with_policy(
            capacity,
            Policy::MinHash {
                hash_seed,
                by_hash: BTreeMap::new(),
            },
        )
    }

    /// Append-only store without a capacity bound.
    pub fn unbounded() -> Self {
        Self::uniform(usize::MAX)
    }

    fn with_policy(capacity: usize, policy: Policy) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        SampleBuffer {
            capacity,
            occurrence: FxHashMap::default(),
            adjacency: FxHashMap::default(),
            policy,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.occurrence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrence.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn is_min_hash(&self) -> bool {
        matches!(self.policy, Policy::MinHash { .. })
    }

    #[inline]
    pub fn contains(&self, e: Edge) -> bool {
        self.occurrence.contains_key(&e)
    }

    /// `O_e` for a buffered edge, 0 otherwise.
    #[inline]
    pub fn occurrence(&self, e: Edge) -> u64 {
        self.occurrence.get(&e).copied().unwrap_or(0)
    }

    pub fn increment_occurrence(&mut self, e: Edge) -> Result<()> {
        match self.occurrence.get_mut(&e) {
            Some(o) => {
                *o += 1;
                Ok(())
            }
            None => Err(Error::Contract("increment_occurrence on an absent edge")),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.occurrence.keys().copied()
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        self.adjacency.get(&u).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Hash of `e` under this buffer's hash seed (min-hash mode only).
    pub fn hash_of(&self, e: Edge) -> Option<EdgeHash> {
        match self.policy {
            Policy::MinHash { hash_seed, .. } => Some(hash01(e, hash_seed)),
            Policy::Uniform { .. } => None,
        }
    }

    /// Stores `e` while the buffer has room.
    pub fn append(&mut self, e: Edge) -> Result<()> {
        if self.is_full() {
            return Err(Error::Contract("append on a full buffer"));
        }
        if self.contains(e) {
            return Err(Error::Contract("append of an already buffered edge"));
        }
        match &mut self.policy {
            Policy::Uniform { slots } => slots.push(e),
            Policy::MinHash { hash_seed, by_hash } => {
                by_hash.insert(hash01(e, *hash_seed), e);
            }
        }
        self.link(e);
        Ok(())
    }

    /// Reservoir step at time `t > M`: draws `i` uniformly from `[1, t]`.
    pub fn replace_uniform<R: Rng + ?Sized>(
        &mut self,
        e: Edge,
        t: u64,
        rng: &mut R,
    ) -> Result<bool> {
        if t <= self.capacity as u64 {
            return Err(Error::Contract("replace_uniform requires T > M"));
        }
        let i = rng.random_range(1..=t);
        self.replace_slot(e, t, i)
    }

    /// Reservoir step with the draw `i ∈ [1, t]` supplied by the caller.
    pub fn replace_slot(&mut self, e: Edge, t: u64, i: u64) -> Result<bool> {
        let Policy::Uniform { slots } = &mut self.policy else {
            return Err(Error::Contract("replace_slot on a min-hash buffer"));
        };
        if slots.len() != self.capacity {
            return Err(Error::Contract("replace on a buffer that is not full"));
        }
        if !(1..=t).contains(&i) {
            return Err(Error::Contract("slot draw outside [1, T]"));
        }
        if i > self.capacity as u64 {
            return Ok(false);
        }
        let old = std::mem::replace(&mut slots[(i - 1) as usize], e);
        self.unlink(old);
        self.link(e);
        Ok(true)
    }

    /// Min-hash step on a full buffer: `e` replaces the edge holding `h_max`
    /// iff `h(e) < h_max`.
    pub fn replace_minhash(&mut self, e: Edge) -> Result<bool> {
        if !self.is_full() {
            return Err(Error::Contract("replace on a buffer that is not full"));
        }
        if self.contains(e) {
            return Err(Error::Contract(
                "replace_minhash with an already buffered edge",
            ));
        }
        let Policy::MinHash { hash_seed, by_hash } = &mut self.policy else {
            return Err(Error::Contract("replace_minhash on a uniform buffer"));
        };
        let h = hash01(e, *hash_seed);
        let top = by_hash.last_entry().expect("full buffer is non-empty");
        if h >= *top.key() {
            return Ok(false);
        }
        let evicted = top.remove();
        by_hash.insert(h, e);
        self.unlink(evicted);
        self.link(e);
        Ok(true)
    }

    /// Largest hash among buffered edges, as an [`EdgeHash`].
    pub fn max_hash(&self) -> Result<EdgeHash> {
        let Policy::MinHash { by_hash, .. } = &self.policy else {
            return Err(Error::Contract("h_max on a uniform buffer"));
        };
        if !self.is_full() {
            return Err(Error::Contract("h_max consulted before the buffer is full"));
        }
        Ok(*by_hash
            .last_key_value()
            .expect("full buffer is non-empty")
            .0)
    }

    /// `h_max`, the maximum hash value in the (full) buffer.
    pub fn h_max(&self) -> Result<f64> {
        self.max_hash().map(EdgeHash::value)
    }

    /// Calls `f` for each `w` adjacent to both `u` and `v` in the buffer.
    /// Iterates the smaller adjacency list.
    #[inline]
    pub fn for_each_common_neighbor<F: FnMut(NodeId)>(&self, u: NodeId, v: NodeId, mut f: F) {
        let (nu, nv) = (self.neighbors(u), self.neighbors(v));
        let (small, other) = if nu.len() <= nv.len() {
            (nu, v)
        } else {
            (nv, u)
        };
        for &w in small {
            if w == other {
                continue;
            }
            if let Ok(e) = Edge::new(w, other) {
                if self.occurrence.contains_key(&e) {
                    f(w);
                }
            }
        }
    }

    pub fn common_neighbors(&self, u: NodeId, v: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.for_each_common_neighbor(u, v, |w| out.push(w));
        out.sort_unstable();
        out
    }

    /// Debug dump, one `a b h(e) O_e` line per buffered edge in edge order.
    /// `h(e)` is `-` for uniform buffers.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut edges: Vec<Edge> = self.edges().collect();
        edges.sort_unstable();
        for e in edges {
            match self.hash_of(e) {
                Some(h) => writeln!(
                    out,
                    "{} {} {:.17} {}",
                    e.a(),
                    e.b(),
                    h.value(),
                    self.occurrence(e)
                )?,
                None => writeln!(out, "{} {} - {}", e.a(), e.b(), self.occurrence(e))?,
            }
        }
        Ok(())
    }

    /// Rebuilds the adjacency and ordering indexes from the edge set and
    /// compares them with the maintained ones.
    pub fn is_consistent(&self) -> bool {
        if self.len() > self.capacity || self.occurrence.values().any(|&o| o == 0) {
            return false;
        }
        let mut rebuilt: FxHashMap<NodeId, Vec<NodeId>> = FxHashMap::default();
        for e in self.edges() {
            rebuilt.entry(e.a()).or_default().push(e.b());
            rebuilt.entry(e.b()).or_default().push(e.a());
        }
        if rebuilt.len() != self.adjacency.len() {
            return false;
        }
        for (node, mut want) in rebuilt {
            let Some(have) = self.adjacency.get(&node) else {
                return false;
            };
            let mut have = have.clone();
            have.sort_unstable();
            want.sort_unstable();
            if have != want {
                return false;
            }
        }
        match &self.policy {
            Policy::Uniform { slots } => {
                slots.len() == self.len() && slots.iter().all(|e| self.contains(*e))
            }
            Policy::MinHash { hash_seed, by_hash } => {
                by_hash.len() == self.len()
                    && by_hash
                        .iter()
                        .all(|(h, e)| self.contains(*e) && hash01(*e, *hash_seed) == *h)
            }
        }
    }

    fn link(&mut self, e: Edge) {
        self.occurrence.insert(e, 1);
        self.adjacency.entry(e.a()).or_default().push(e.b());
        self.adjacency.entry(e.b()).or_default().push(e.a());
    }

    fn unlink(&mut self, e: Edge) {
        self.occurrence.remove(&e);
        self.detach(e.a(), e.b());
        self.detach(e.b(), e.a());
    }

    fn detach(&mut self, from: NodeId, to: NodeId) {
        if let Some(list) = self.adjacency.get_mut(&from) {
            if let Some(pos) = list.iter().position(|&x| x == to) {
                list.swap_remove(pos);
            }
            if list.is_empty() {
                self.adjacency.remove(&from);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn e(u: u32, v: u32) -> Edge {
        Edge::new(u, v).unwrap()
    }

    /// Finds edges whose hashes fall in the given ranges, for building
    /// buffers with known hash layouts.
    fn edge_with_hash_in(lo: f64, hi: f64, seed: u64, skip: &HashSet<Edge>) -> Edge {
        (1u32..)
            .flat_map(|a| (0..a).map(move |b| e(b, a)))
            .find(|x| {
                let h = hash01(*x, seed).value();
                h > lo && h < hi && !skip.contains(x)
            })
            .unwrap()
    }

    #[test]
    fn hash_is_deterministic_and_symmetric() {
        let x = e(3, 9);
        assert_eq!(hash01(x, 5), hash01(x, 5));
        assert_eq!(hash01(e(9, 3), 5), hash01(e(3, 9), 5));
        assert_ne!(hash01(x, 5), hash01(x, 6));
        let v = hash01(x, 5).value();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn hash_extremes_stay_in_open_interval() {
        assert!(EdgeHash(0).value() > 0.0);
        assert!(EdgeHash((1 << HASH_BITS) - 1).value() < 1.0);
    }

    #[test]
    fn hash_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000usize;
        let mut bins = [0u64; 100];
        let mut sum = 0.0;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.random_range(0..1_000_000u32);
            let b = rng.random_range(0..1_000_000u32);
            let Ok(x) = Edge::new(a, b) else { continue };
            let h = hash01(x, 42).value();
            sum += h;
            bins[((h * 100.0) as usize).min(99)] += 1;
            values.push(h);
        }
        let count = values.len() as f64;
        let mean = sum / count;
        let se = (1.0 / 12.0f64 / count).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * se, "mean {mean}");

        let expected = count / 100.0;
        let chi2: f64 = bins
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square critical value, 99 dof, alpha = 0.01
        assert!(chi2 < 134.642, "chi2 = {chi2}");

        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                ((i + 1) as f64 / count - v)
                    .abs()
                    .max((v - i as f64 / count).abs())
            })
            .fold(0.0, f64::max);
        // asymptotic KS critical value at alpha = 0.01
        assert!(d < 1.628 / count.sqrt(), "ks d = {d}");
    }

    #[test]
    fn append_and_capacity() {
        let mut buf = SampleBuffer::uniform(3);
        buf.append(e(1, 2)).unwrap();
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.neighbors(NodeId(1)), &[NodeId(2)]);
        buf.append(e(2, 3)).unwrap();
        buf.append(e(3, 4)).unwrap();
        assert_eq!(buf.len(), 3);
        assert!(matches!(buf.append(e(4, 5)), Err(Error::Contract(_))));
        assert!(buf.is_consistent());
    }

    #[test]
    fn forced_uniform_draws() {
        let mut buf = SampleBuffer::uniform(2);
        buf.append(e(1, 2)).unwrap();
        buf.append(e(3, 4)).unwrap();
        assert!(buf.replace_slot(e(5, 6), 3, 1).unwrap());
        assert!(!buf.contains(e(1, 2)));
        assert!(buf.contains(e(5, 6)));
        assert!(buf.neighbors(NodeId(1)).is_empty());

        assert!(!buf.replace_slot(e(7, 8), 4, 4).unwrap());
        assert!(!buf.contains(e(7, 8)));
        assert_eq!(buf.len(), 2);
        assert!(buf.is_consistent());
    }

    #[test]
    fn uniform_marginals() {
        // Each of T=100 items ends in an M=10 reservoir with probability 0.1.
        let (m, t, trials) = (10usize, 100u32, 50_000u32);
        let mut hits = vec![0u64; t as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..trials {
            let mut buf = SampleBuffer::uniform(m);
            for i in 0..t {
                let x = e(2 * i, 2 * i + 1);
                if buf.len() < m {
                    buf.append(x).unwrap();
                } else {
                    buf.replace_uniform(x, (i + 1) as u64, &mut rng).unwrap();
                }
            }
            for x in buf.edges() {
                hits[(x.a().0 / 2) as usize] += 1;
            }
        }
        let p = m as f64 / t as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for (i, &h) in hits.iter().enumerate() {
            let f = h as f64 / trials as f64;
            assert!((f - p).abs() <= 3.0 * se, "item {i}: {f}");
        }
    }

    #[test]
    fn min_hash_direct_rule() {
        let seed = 9;
        let mut used = HashSet::new();
        let mut pick = |lo, hi| {
            let x = edge_with_hash_in(lo, hi, seed, &used);
            used.insert(x);
            x
        };
        let low = pick(0.09, 0.11);
        let mid = pick(0.49, 0.51);
        let high = pick(0.89, 0.91);
        let new = pick(0.29, 0.31);
        let rejected = pick(0.94, 0.96);

        let mut buf = SampleBuffer::min_hash(3, seed);
        for x in [low, mid, high] {
            buf.append(x).unwrap();
        }
        assert!((buf.h_max().unwrap() - 0.9).abs() < 0.011);
        assert!(buf.replace_minhash(new).unwrap());
        assert!(!buf.contains(high));
        assert_eq!(buf.max_hash().unwrap(), hash01(mid, seed));

        let before: Vec<Edge> = {
            let mut v: Vec<_> = buf.edges().collect();
            v.sort();
            v
        };
        assert!(!buf.replace_minhash(rejected).unwrap());
        let mut after: Vec<_> = buf.edges().collect();
        after.sort();
        assert_eq!(before, after);
        assert!(buf.is_consistent());
    }

    #[test]
    fn h_max_requires_full_min_hash_buffer() {
        let mut buf = SampleBuffer::min_hash(2, 1);
        buf.append(e(1, 2)).unwrap();
        assert!(buf.h_max().is_err());
        assert!(SampleBuffer::uniform(1).h_max().is_err());
    }

    #[test]
    fn common_neighbor_enumeration() {
        let mut buf = SampleBuffer::uniform(10);
        for x in [e(1, 2), e(1, 3), e(2, 3), e(2, 4)] {
            buf.append(x).unwrap();
        }
        let n = |v: u32| NodeId(v);
        assert_eq!(buf.common_neighbors(n(1), n(2)), vec![n(3)]);
        assert_eq!(buf.common_neighbors(n(1), n(4)), vec![n(2)]);
        assert_eq!(buf.common_neighbors(n(3), n(4)), vec![n(2)]);
        assert!(buf.common_neighbors(n(5), n(6)).is_empty());
    }

    #[test]
    fn occurrence_accounting() {
        let mut buf = SampleBuffer::min_hash(4, 3);
        buf.append(e(1, 2)).unwrap();
        assert_eq!(buf.occurrence(e(1, 2)), 1);
        for _ in 0..3 {
            buf.increment_occurrence(e(1, 2)).unwrap();
        }
        assert_eq!(buf.occurrence(e(1, 2)), 4);
        assert!(!buf.contains(e(5, 6)));
        assert_eq!(buf.occurrence(e(5, 6)), 0);
        assert!(buf.increment_occurrence(e(5, 6)).is_err());
    }

    #[test]
    fn dump_format() {
        let mut buf = SampleBuffer::uniform(4);
        buf.append(e(2, 1)).unwrap();
        let mut out = Vec::new();
        buf.dump(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 2 - 1\n");
    }

    /// Feeds a multigraph stream through min-hash sampling, returning the
    /// buffer and asserting the per-step invariants on the way.
    fn run_min_hash(stream: &[Edge], m: usize, seed: u64) -> SampleBuffer {
        let mut buf = SampleBuffer::min_hash(m, seed);
        let mut last_max: Option<EdgeHash> = None;
        for &x in stream {
            if buf.contains(x) {
                buf.increment_occurrence(x).unwrap();
            } else if !buf.is_full() {
                buf.append(x).unwrap();
            } else {
                buf.replace_minhash(x).unwrap();
            }
            if buf.is_full() {
                let h = buf.max_hash().unwrap();
                if let Some(prev) = last_max {
                    assert!(h <= prev, "h_max increased");
                }
                last_max = Some(h);
            }
            assert!(buf.len() <= m);
        }
        buf
    }

    proptest! {
        #[test]
        fn min_hash_keeps_smallest_hashes(
            raw in prop::collection::vec((0u32..15, 0u32..15), 1..120),
            m in 1usize..12,
            seed in any::<u64>(),
        ) {
            let stream: Vec<Edge> = raw.into_iter().filter_map(|(a, b)| Edge::new(a, b).ok()).collect();
            let buf = run_min_hash(&stream, m, seed);
            prop_assert!(buf.is_consistent());

            let mut distinct: Vec<Edge> = stream.iter().copied().collect::<HashSet<_>>().into_iter().collect();
            distinct.sort_by_key(|x| hash01(*x, seed));
            distinct.truncate(m);
            let want: HashSet<Edge> = distinct.into_iter().collect();
            let have: HashSet<Edge> = buf.edges().collect();
            prop_assert_eq!(have, want);
        }

        #[test]
        fn uniform_adjacency_stays_consistent(
            raw in prop::collection::vec((0u32..10, 0u32..10), 1..80),
            m in 1usize..8,
            seed in any::<u64>(),
        ) {
            let stream: Vec<Edge> = raw.into_iter().filter_map(|(a, b)| Edge::new(a, b).ok())
                .collect::<Vec<_>>();
            let stream = crate::stream::preprocess_simple(stream.iter().map(|x| x.endpoints()));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut buf = SampleBuffer::uniform(m);
            for (t, &x) in stream.iter().enumerate() {
                if !buf.is_full() {
                    buf.append(x).unwrap();
                } else {
                    buf.replace_uniform(x, t as u64 + 1, &mut rng).unwrap();
                }
                prop_assert!(buf.is_consistent());
            }
        }
    }
}
