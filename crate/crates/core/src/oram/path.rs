use std::collections::BTreeMap;

use rand::Rng;

use super::{check_block, decode_slot, encode_slot, Oram};
use crate::error::{invalid, Error, Result};
use crate::rng::StreamRng;
use crate::store::{decrypt, encrypt, Ciphertext, SecretKey};

/// Slots per bucket.
pub const DEFAULT_BUCKET_SIZE: usize = 4;
/// Stash size at which an access fails.
pub const DEFAULT_STASH_LIMIT: usize = 1024;

/// Path ORAM with client-side position map and stash.
///
/// The server holds a complete binary tree of 2^(L+1) − 1 buckets with
/// L = ⌈log₂ capacity⌉; each access reads one root-to-leaf path into the
/// stash, remaps the block to a fresh uniform leaf and writes the path back
/// with every slot re-encrypted.
pub struct PathOram {
    capacity: usize,
    block_len: usize,
    bucket_size: usize,
    height: usize,
    position: Vec<usize>,
    stash: BTreeMap<usize, Vec<u8>>,
    buckets: Vec<Vec<Ciphertext>>,
    key: SecretKey,
    rng: StreamRng,
    stash_limit: usize,
    max_stash: usize,
    log: Vec<usize>,
}

impl PathOram {
    pub fn new(capacity: usize, block_len: usize, rng: StreamRng) -> Result<Self> {
        Self::with_params(capacity, block_len, DEFAULT_BUCKET_SIZE, DEFAULT_STASH_LIMIT, rng)
    }

    pub fn with_params(
        capacity: usize,
        block_len: usize,
        bucket_size: usize,
        stash_limit: usize,
        mut rng: StreamRng,
    ) -> Result<Self> {
        if capacity == 0 || capacity > u32::MAX as usize - 1 {
            return Err(invalid(format!("ORAM capacity {capacity} out of range")));
        }
        if bucket_size == 0 {
            return Err(invalid("ORAM buckets need at least one slot"));
        }
        let height = capacity.next_power_of_two().trailing_zeros() as usize;
        let key = SecretKey::generate(&mut rng);
        let leaves = 1usize << height;
        let position = (0..capacity).map(|_| rng.random_range(0..leaves)).collect();
        let dummy = encode_slot(None, &vec![0u8; block_len]);
        let buckets = (0..(2 * leaves - 1))
            .map(|_| {
                (0..bucket_size)
                    .map(|_| encrypt(&key, &dummy, &mut rng))
                    .collect()
            })
            .collect();
        Ok(PathOram {
            capacity,
            block_len,
            bucket_size,
            height,
            position,
            stash: BTreeMap::new(),
            buckets,
            key,
            rng,
            stash_limit,
            max_stash: 0,
            log: Vec::new(),
        })
    }

    /// L: edges on a root-to-leaf path.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn leaves(&self) -> usize {
        1 << self.height
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn slot_count(&self) -> usize {
        self.buckets.len() * self.bucket_size
    }

    pub fn stash_len(&self) -> usize {
        self.stash.len()
    }

    /// Largest stash observed after any access.
    pub fn max_stash(&self) -> usize {
        self.max_stash
    }

    pub fn server_buckets(&self) -> &[Vec<Ciphertext>] {
        &self.buckets
    }

    // Heap index of the bucket at `level` on the path to `leaf`.
    fn node(&self, leaf: usize, level: usize) -> usize {
        (1 << level) - 1 + (leaf >> (self.height - level))
    }

    /// Heap indices of the buckets on the path to `leaf`, root first.
    pub fn path(&self, leaf: usize) -> Vec<usize> {
        (0..=self.height).map(|l| self.node(leaf, l)).collect()
    }

    /// Verifies that every stored block lies on the path of its mapped
    /// leaf or in the stash, and that no address is stored twice.
    pub fn check_invariant(&self) -> Result<()> {
        let mut seen: BTreeMap<usize, ()> = self.stash.keys().map(|&a| (a, ())).collect();
        for (idx, bucket) in self.buckets.iter().enumerate() {
            let level = (idx + 1).ilog2() as usize;
            for ct in bucket {
                let plain = decrypt(&self.key, ct)?;
                if let Some((addr, _)) = decode_slot(&plain) {
                    if self.node(self.position[addr], level) != idx {
                        return Err(Error::Protocol(format!(
                            "block {addr} in bucket {idx} is off its path"
                        )));
                    }
                    if seen.insert(addr, ()).is_some() {
                        return Err(Error::Protocol(format!("block {addr} stored twice")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Oram for PathOram {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn block_len(&self) -> usize {
        self.block_len
    }

    fn access(&mut self, addr: usize, write: Option<&[u8]>) -> Result<Vec<u8>> {
        check_block(addr, self.capacity, write, self.block_len)?;
        let leaf = self.position[addr];
        self.position[addr] = self.rng.random_range(0..self.leaves());
        self.log.push(leaf);

        for level in 0..=self.height {
            let idx = self.node(leaf, level);
            for ct in &self.buckets[idx] {
                let plain = decrypt(&self.key, ct)?;
                if let Some((a, data)) = decode_slot(&plain) {
                    self.stash.insert(a, data.to_vec());
                }
            }
        }

        let previous = self
            .stash
            .get(&addr)
            .cloned()
            .unwrap_or_else(|| vec![0u8; self.block_len]);
        if let Some(data) = write {
            self.stash.insert(addr, data.to_vec());
        }

        let dummy = encode_slot(None, &vec![0u8; self.block_len]);
        for level in (0..=self.height).rev() {
            let shift = self.height - level;
            let chosen: Vec<usize> = self
                .stash
                .keys()
                .copied()
                .filter(|&a| self.position[a] >> shift == leaf >> shift)
                .take(self.bucket_size)
                .collect();
            let mut bucket = Vec::with_capacity(self.bucket_size);
            for a in &chosen {
                let data = self.stash.remove(a).unwrap();
                bucket.push(encrypt(&self.key, &encode_slot(Some(*a), &data), &mut self.rng));
            }
            while bucket.len() < self.bucket_size {
                bucket.push(encrypt(&self.key, &dummy, &mut self.rng));
            }
            let idx = self.node(leaf, level);
            self.buckets[idx] = bucket;
        }

        self.max_stash = self.max_stash.max(self.stash.len());
        if self.stash.len() > self.stash_limit {
            return Err(Error::OramOverflow {
                size: self.stash.len(),
                limit: self.stash_limit,
            });
        }
        Ok(previous)
    }

    fn buckets_per_access(&self) -> usize {
        self.height + 1
    }

    fn access_log(&self) -> &[usize] {
        &self.log
    }

    fn clear_log(&mut self) {
        self.log.clear();
    }
}
