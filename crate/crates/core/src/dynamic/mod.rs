//! Batched updates over DP-ORAM.
//!
//! Updates wait in a client buffer of u entries. Each full buffer becomes
//! one batch: its signed per-key delta is fed to a binary counter whose
//! dyadic nodes are released with fresh noise, the ORAM is updated, and
//! query counts become the static index plus the noisy prefix of deltas.

mod counter;
mod system;

pub use counter::{completed_nodes, counter_levels, prefix_nodes, total_nodes, DyadicNode};
pub use system::{suggest_batch_size, DynamicParams, DynamicSystem, PushOutcome, Update};
