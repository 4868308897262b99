//! Oblivious RAM engines.
//!
//! [`PathOram`] is the production engine; [`LinearOram`] touches every slot
//! on every access and serves as a correctness oracle.

mod linear;
mod path;

pub use linear::LinearOram;
pub use path::{PathOram, DEFAULT_BUCKET_SIZE, DEFAULT_STASH_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::StreamRng;

/// An oblivious block store with a fixed number of addresses.
///
/// Reads and writes look identical to the server.
pub trait Oram: Send {
    fn capacity(&self) -> usize;

    fn block_len(&self) -> usize;

    /// Reads `addr`, optionally replacing its payload, and returns the
    /// payload held before the access. Unwritten addresses read as zeros.
    fn access(&mut self, addr: usize, write: Option<&[u8]>) -> Result<Vec<u8>>;

    fn read(&mut self, addr: usize) -> Result<Vec<u8>> {
        self.access(addr, None)
    }

    fn write(&mut self, addr: usize, data: &[u8]) -> Result<()> {
        self.access(addr, Some(data)).map(|_| ())
    }

    /// Server buckets read (and written back) per access.
    fn buckets_per_access(&self) -> usize;

    /// Server-visible location of every access so far: the leaf for Path
    /// ORAM, always 0 for the linear scan.
    fn access_log(&self) -> &[usize];

    fn clear_log(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Path,
    Linear,
}

/// Initializes an engine with every address empty.
pub fn init(engine: Engine, capacity: usize, block_len: usize, rng: StreamRng) -> Result<Box<dyn Oram>> {
    init_with(engine, capacity, block_len, DEFAULT_BUCKET_SIZE, rng)
}

/// Like [`init`] with Path ORAM buckets of `bucket_size` slots.
pub fn init_with(
    engine: Engine,
    capacity: usize,
    block_len: usize,
    bucket_size: usize,
    rng: StreamRng,
) -> Result<Box<dyn Oram>> {
    Ok(match engine {
        Engine::Path => Box::new(PathOram::with_params(
            capacity,
            block_len,
            bucket_size,
            DEFAULT_STASH_LIMIT,
            rng,
        )?),
        Engine::Linear => Box::new(LinearOram::new(capacity, block_len, rng)?),
    })
}

/// Server buckets per access for an engine of `capacity` addresses,
/// without building it.
pub fn buckets_per_access(engine: Engine, capacity: usize) -> usize {
    match engine {
        Engine::Path => capacity.max(1).next_power_of_two().trailing_zeros() as usize + 1,
        Engine::Linear => capacity,
    }
}

fn check_block(addr: usize, capacity: usize, write: Option<&[u8]>, block_len: usize) -> Result<()> {
    use crate::error::invalid;
    if addr >= capacity {
        return Err(invalid(format!("ORAM address {addr} outside [0, {capacity})")));
    }
    if let Some(d) = write {
        if d.len() != block_len {
            return Err(invalid(format!(
                "ORAM block of {} bytes, expected {block_len}",
                d.len()
            )));
        }
    }
    Ok(())
}

// Slot plaintext: address + 1 (0 marks a dummy) followed by the block.
fn encode_slot(addr: Option<usize>, data: &[u8]) -> Vec<u8> {
    let tag = addr.map_or(0u32, |a| a as u32 + 1);
    let mut out = Vec::with_capacity(4 + data.len());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(data);
    out
}

fn decode_slot(plain: &[u8]) -> Option<(usize, &[u8])> {
    let tag = u32::from_le_bytes(plain[..4].try_into().unwrap());
    (tag != 0).then(|| (tag as usize - 1, &plain[4..]))
}
