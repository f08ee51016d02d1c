//! Sparse per-node triangle counts and their CSV form.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::stream::{NodeId, NodeInterner};

/// Per-node triangle count or estimate. Absent nodes read as 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalCounts {
    counts: BTreeMap<NodeId, f64>,
}

impl LocalCounts {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn get(&self, u: NodeId) -> f64 {
        self.counts.get(&u).copied().unwrap_or(0.0)
    }

    pub fn insert(&mut self, u: NodeId, value: f64) {
        self.counts.insert(u, value);
    }

    pub fn add(&mut self, u: NodeId, value: f64) {
        *self.counts.entry(u).or_insert(0.0) += value;
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.counts.contains_key(&u)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.counts.iter().map(|(&u, &c)| (u, c))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.counts.keys().copied()
    }

    /// Global triangle count implied by local counts: every triangle is
    /// counted at exactly three nodes.
    pub fn global(&self) -> f64 {
        self.counts.values().sum::<f64>() / 3.0
    }

    /// Writes the `node,estimate` CSV, nodes printed as original tokens.
    pub fn write_csv<W: Write>(&self, mut out: W, interner: &NodeInterner) -> Result<()> {
        writeln!(out, "node,estimate")?;
        for (u, c) in self.iter() {
            writeln!(out, "{},{}", interner.token(u), format_estimate(c))?;
        }
        out.flush()?;
        Ok(())
    }
}

impl FromIterator<(NodeId, f64)> for LocalCounts {
    fn from_iter<I: IntoIterator<Item = (NodeId, f64)>>(iter: I) -> Self {
        LocalCounts {
            counts: iter.into_iter().collect(),
        }
    }
}

/// Sum of local counts divided by three.
pub fn global_from_local(counts: &LocalCounts) -> f64 {
    counts.global()
}

/// Rounds to 10 significant digits and prints the shortest decimal form
/// that reproduces the rounded value (`3`, `1.222222222`, `1234567890000`).
pub fn format_estimate(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}
