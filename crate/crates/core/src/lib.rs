//! Differentially private outsourced storage.
//!
//! The crate models a client that outsources encrypted records to an
//! honest-but-curious server while bounding what the server learns from
//! access patterns and communication volume:
//!
//! * [`range`] and [`point`] are *atomic* stores: the server sees which
//!   ciphertexts each query touches, so records are bucketized and padded
//!   with dummies whose number is drawn from a differentially private
//!   sanitizer.
//! * [`dp_oram`] keeps every record once inside a Path ORAM and lets a
//!   sanitized count dictate how many oblivious accesses each query makes.
//! * [`dynamic`] layers batched updates on top of DP-ORAM using a binary
//!   counter tree of noisy histogram deltas.
//!
//! Randomness always flows from explicitly seeded streams (see [`rng`]), so
//! every setup and query sequence can be replayed bit for bit.

pub mod dp;
pub mod dp_oram;
pub mod dynamic;
pub mod error;
pub mod oram;
pub mod point;
pub mod query;
pub mod range;
pub mod rng;
pub mod sanitize;
pub mod store;

pub use dp::{DpParams, Epsilon, NoiseMode, PrivacyBudget};
pub use error::{Error, Result};
pub use query::{Query, QueryKind};
pub use store::{BitKey, Record, SearchKey};
