use super::{check_block, decode_slot, encode_slot, Oram};
use crate::error::{invalid, Result};
use crate::rng::StreamRng;
use crate::store::{decrypt, encrypt, Ciphertext, SecretKey};

/// Reads and re-encrypts every slot on every access.
pub struct LinearOram {
    block_len: usize,
    slots: Vec<Ciphertext>,
    key: SecretKey,
    rng: StreamRng,
    log: Vec<usize>,
}

impl LinearOram {
    pub fn new(capacity: usize, block_len: usize, mut rng: StreamRng) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("ORAM capacity must be at least 1"));
        }
        let key = SecretKey::generate(&mut rng);
        let empty = vec![0u8; block_len];
        let slots = (0..capacity)
            .map(|a| encrypt(&key, &encode_slot(Some(a), &empty), &mut rng))
            .collect();
        Ok(LinearOram {
            block_len,
            slots,
            key,
            rng,
            log: Vec::new(),
        })
    }
}

impl Oram for LinearOram {
    fn capacity(&self) -> usize {
        self.slots.len()
    }

    fn block_len(&self) -> usize {
        self.block_len
    }

    fn access(&mut self, addr: usize, write: Option<&[u8]>) -> Result<Vec<u8>> {
        check_block(addr, self.slots.len(), write, self.block_len)?;
        let mut out = Vec::new();
        for slot in 0..self.slots.len() {
            let plain = decrypt(&self.key, &self.slots[slot])?;
            let (a, data) = decode_slot(&plain).expect("linear slots are never dummies");
            let data = if a == addr {
                out = data.to_vec();
                write.unwrap_or(data)
            } else {
                data
            };
            self.slots[slot] = encrypt(&self.key, &encode_slot(Some(a), data), &mut self.rng);
        }
        self.log.push(0);
        Ok(out)
    }

    fn buckets_per_access(&self) -> usize {
        self.slots.len()
    }

    fn access_log(&self) -> &[usize] {
        &self.log
    }

    fn clear_log(&mut self) {
        self.log.clear();
    }
}
