use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{release, Histogram};
use crate::dp::{solve_offset, DpParams, Epsilon, Tail};
use crate::error::{invalid, Result};

/// Geometry of a complete k-ary tree over a domain padded to k^height leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    domain: usize,
    arity: usize,
    height: usize,
}

/// A node addressed by depth (0 = root) and position within its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl TreeShape {
    pub fn new(domain: usize, arity: usize) -> Result<Self> {
        if domain == 0 {
            return Err(invalid("tree domain must be non-empty"));
        }
        if arity < 2 {
            return Err(invalid(format!("tree arity must be at least 2, got {arity}")));
        }
        let mut height = 1;
        let mut leaves = arity;
        while leaves < domain {
            leaves = leaves
                .checked_mul(arity)
                .ok_or_else(|| invalid("tree too large"))?;
            height += 1;
        }
        Ok(TreeShape {
            domain,
            arity,
            height,
        })
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Edges on a root-to-leaf path.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Levels including the root; every record lands in one node per level.
    pub fn levels(&self) -> usize {
        self.height + 1
    }

    pub fn leaves(&self) -> usize {
        self.arity.pow(self.height as u32)
    }

    pub fn level_width(&self, level: usize) -> usize {
        self.arity.pow(level as u32)
    }

    pub fn node_count(&self) -> usize {
        (0..self.levels()).map(|l| self.level_width(l)).sum()
    }

    /// Upper bound on the size of any minimal range cover.
    pub fn max_cover(&self) -> usize {
        2 * (self.arity - 1) * self.height
    }

    /// Laplace scale making the whole tree ε-DP: one unit of sensitivity per level.
    pub fn noise_scale(&self, epsilon: Epsilon) -> f64 {
        self.levels() as f64 / epsilon.value()
    }

    /// Position of a node in level order.
    pub fn flat_index(&self, node: NodeId) -> usize {
        (0..node.level).map(|l| self.level_width(l)).sum::<usize>() + node.index
    }

    /// 1-based inclusive range of (padded) domain positions under `node`.
    pub fn node_range(&self, node: NodeId) -> (usize, usize) {
        let span = self.arity.pow((self.height - node.level) as u32);
        (node.index * span + 1, (node.index + 1) * span)
    }

    /// Minimal set of disjoint nodes whose ranges union to `[lo, hi]`.
    pub fn cover(&self, lo: usize, hi: usize) -> Result<Vec<NodeId>> {
        if lo < 1 || lo > hi || hi > self.domain {
            return Err(invalid(format!(
                "range [{lo}, {hi}] outside domain [1, {}]",
                self.domain
            )));
        }
        let k = self.arity;
        let (mut l, mut r) = (lo - 1, hi);
        let mut level = self.height;
        let mut nodes = Vec::new();
        while l < r {
            if level == 0 {
                nodes.push(NodeId { level, index: 0 });
                break;
            }
            while l < r && l % k != 0 {
                nodes.push(NodeId { level, index: l });
                l += 1;
            }
            while r > l && r % k != 0 {
                r -= 1;
                nodes.push(NodeId { level, index: r });
            }
            l /= k;
            r /= k;
            level -= 1;
        }
        Ok(nodes)
    }

    /// Exact per-node counts (level order) for signed per-position counts.
    pub fn node_sums(&self, counts: &[i64]) -> Vec<i64> {
        let mut levels: Vec<Vec<i64>> = Vec::with_capacity(self.levels());
        let mut leaves = vec![0i64; self.leaves()];
        leaves[..counts.len()].copy_from_slice(counts);
        levels.push(leaves);
        for _ in 0..self.height {
            let below = levels.last().unwrap();
            levels.push(below.chunks(self.arity).map(|c| c.iter().sum()).collect());
        }
        levels.into_iter().rev().flatten().collect()
    }
}

/// Hierarchical noisy counts over a k-ary tree.
///
/// Each node holds its subtree count plus noise plus a common offset, so any
/// range is answered by summing the nodes of its minimal cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyTree {
    shape: TreeShape,
    values: Vec<f64>,
    offset: f64,
    epsilon: f64,
    beta: f64,
}

impl NoisyTree {
    /// Tree with the positivity offset μ_h solved over all of its nodes.
    pub fn build<R: Rng + ?Sized>(
        hist: &Histogram,
        arity: usize,
        params: DpParams,
        rng: &mut R,
    ) -> Result<Self> {
        let shape = TreeShape::new(hist.domain(), arity)?;
        let scale = shape.noise_scale(params.epsilon);
        let offset = solve_offset(
            params.noise,
            shape.node_count() as u64,
            scale,
            params.beta,
            Tail::Lower,
        )?
        .padding() as f64;
        Ok(Self::with_offset(&hist.signed(), shape, params, offset, rng))
    }

    /// Tree over arbitrary signed counts with a caller-chosen per-node offset.
    pub fn with_offset<R: Rng + ?Sized>(
        counts: &[i64],
        shape: TreeShape,
        params: DpParams,
        offset: f64,
        rng: &mut R,
    ) -> Self {
        let scale = shape.noise_scale(params.epsilon);
        let values = shape
            .node_sums(counts)
            .into_iter()
            .map(|c| c as f64 + params.noise.sample(scale, rng) + offset)
            .collect();
        NoisyTree {
            shape,
            values,
            offset,
            epsilon: params.epsilon.value(),
            beta: params.beta,
        }
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn value(&self, node: NodeId) -> f64 {
        self.values[self.shape.flat_index(node)]
    }

    /// Noisy node values in level order, root first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Minimal node cover of `[lo, hi]`.
    pub fn min_node_cover(&self, lo: usize, hi: usize) -> Result<Vec<NodeId>> {
        self.shape.cover(lo, hi)
    }

    /// Noisy count of `[lo, hi]` before rounding.
    pub fn range_sum(&self, lo: usize, hi: usize) -> Result<f64> {
        Ok(self
            .shape
            .cover(lo, hi)?
            .into_iter()
            .map(|n| self.value(n))
            .sum())
    }

    /// Noisy count of `[lo, hi]`, rounded up.
    pub fn range_count(&self, lo: usize, hi: usize) -> Result<i64> {
        Ok(release(self.range_sum(lo, hi)?))
    }

    /// Noisy prefix counts for positions 1..=N, made non-decreasing.
    pub fn cumulative(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.shape.domain);
        let mut running = i64::MIN;
        for j in 1..=self.shape.domain {
            let v = release(self.range_sum(1, j).expect("prefix within domain"));
            running = running.max(v);
            out.push(running);
        }
        out
    }
}
