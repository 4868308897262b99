//! Differentially private count-release structures.
//!
//! Every structure adds a positivity offset to its noise so released counts
//! overcount the truth with probability at least 1 − β; answers are rounded
//! up to whole records.

mod attribute;
mod histogram;
mod index;
mod tree;

pub use attribute::NoisyAttributeIndex;
pub use histogram::{Histogram, NoisyHistogram};
pub use index::SanitizedIndex;
pub use tree::{NodeId, NoisyTree, TreeShape};

/// Rounds a noisy real count up to an integer record count.
pub(crate) fn release(x: f64) -> i64 {
    x.ceil() as i64
}
