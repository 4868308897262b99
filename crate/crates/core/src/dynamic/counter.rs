//! Dyadic decomposition for the binary counter over batches.

use serde::{Deserialize, Serialize};

/// The interval of batches [index·2^level + 1, (index + 1)·2^level].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicNode {
    pub level: u32,
    pub index: u64,
}

impl DyadicNode {
    /// First and last batch (1-based, inclusive) covered by the node.
    pub fn batches(&self) -> (u64, u64) {
        let span = 1u64 << self.level;
        (self.index * span + 1, (self.index + 1) * span)
    }

    pub fn contains(&self, batch: u64) -> bool {
        let (lo, hi) = self.batches();
        lo <= batch && batch <= hi
    }
}

/// ⌈log₂ t⌉ + 1: nodes per batch and the bound on prefix cover size.
pub fn counter_levels(t: u64) -> u32 {
    if t <= 1 {
        1
    } else {
        (t - 1).ilog2() + 2
    }
}

/// Nodes summing to the prefix [1, t], largest first: one per set bit of t.
pub fn prefix_nodes(t: u64) -> Vec<DyadicNode> {
    let mut nodes = Vec::new();
    let mut start = 0u64;
    for level in (0..64).rev() {
        if t >> level & 1 == 1 {
            nodes.push(DyadicNode {
                level,
                index: start >> level,
            });
            start += 1 << level;
        }
    }
    nodes
}

/// Nodes that become complete once batch `t` arrives.
pub fn completed_nodes(t: u64) -> Vec<DyadicNode> {
    (0..=t.trailing_zeros())
        .map(|level| DyadicNode {
            level,
            index: (t >> level) - 1,
        })
        .collect()
}

/// Every node a horizon of `horizon` batches can complete.
pub fn total_nodes(horizon: u64) -> u64 {
    (1..=horizon).map(|t| t.trailing_zeros() as u64 + 1).sum()
}
