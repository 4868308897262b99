use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cipher::{decrypt_record, encrypt_dummy, encrypt_record, Ciphertext, SecretKey};
use super::record::Record;
use super::trace::LeakageTrace;
use crate::error::{Error, Result};

/// Contiguous slice of ds1 holding one bin or bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub start: usize,
    pub len: usize,
}

impl Group {
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// The honest-but-curious server of the atomic model.
///
/// `ds1` is the encrypted record array; `ds2` is the group layout, which the
/// client derives from search keys and noisy counts alone.
#[derive(Debug, Clone)]
pub struct ServerStore {
    ds1: Vec<Ciphertext>,
    ds2: Vec<usize>,
    trace: LeakageTrace,
}

impl ServerStore {
    pub fn new(ds1: Vec<Ciphertext>, ds2: Vec<usize>) -> Self {
        ServerStore {
            ds1,
            ds2,
            trace: LeakageTrace::new(),
        }
    }

    /// Stored records n′ (real and dummy).
    pub fn len(&self) -> usize {
        self.ds1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ds1.is_empty()
    }

    pub fn ds1(&self) -> &[Ciphertext] {
        &self.ds1
    }

    pub fn ds2(&self) -> &[usize] {
        &self.ds2
    }

    pub fn trace(&self) -> &LeakageTrace {
        &self.trace
    }

    /// Replaces the trace, e.g. to start a fresh or volumes-only session.
    pub fn set_trace(&mut self, trace: LeakageTrace) -> LeakageTrace {
        std::mem::replace(&mut self.trace, trace)
    }

    /// Returns the requested ciphertexts and logs the access.
    pub fn fetch(&mut self, indices: &[usize]) -> Result<Vec<&Ciphertext>> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.ds1.len()) {
            return Err(Error::Protocol(format!(
                "index {bad} outside store of {} ciphertexts",
                self.ds1.len()
            )));
        }
        self.trace.record(indices, indices.len());
        Ok(indices.iter().map(|&i| &self.ds1[i]).collect())
    }
}

/// Encrypts each group's records padded with dummies to its size, shuffled
/// within the group, and lays the groups out back to back.
pub fn upload_groups<R: Rng + ?Sized>(
    groups: &[Vec<&Record>],
    sizes: &[usize],
    key: &SecretKey,
    payload_len: usize,
    rng: &mut R,
) -> Result<(ServerStore, Vec<Group>)> {
    debug_assert_eq!(groups.len(), sizes.len());
    let total: usize = sizes.iter().sum();
    let mut ds1 = Vec::with_capacity(total);
    let mut layout = Vec::with_capacity(groups.len());
    for (bucket, (records, &size)) in groups.iter().zip(sizes).enumerate() {
        if records.len() > size {
            return Err(Error::BucketOverflow {
                bucket,
                count: records.len(),
                capacity: size,
            });
        }
        let mut slots: Vec<Option<&Record>> = records.iter().map(|&r| Some(r)).collect();
        slots.resize(size, None);
        slots.shuffle(rng);
        layout.push(Group {
            start: ds1.len(),
            len: size,
        });
        for slot in slots {
            ds1.push(match slot {
                Some(r) => encrypt_record(key, r, payload_len, rng)?,
                None => encrypt_dummy(key, payload_len, rng),
            });
        }
    }
    Ok((ServerStore::new(ds1, sizes.to_vec()), layout))
}

/// Fetches whole groups, decrypts them and keeps the real records `keep` accepts.
pub fn fetch_groups(
    server: &mut ServerStore,
    key: &SecretKey,
    groups: &[Group],
    keep: impl Fn(&Record) -> bool,
) -> Result<Vec<Record>> {
    let indices: Vec<usize> = groups.iter().flat_map(|g| g.indices()).collect();
    let mut out = Vec::new();
    for ct in server.fetch(&indices)? {
        if let Some(r) = decrypt_record(key, ct)? {
            if keep(&r) {
                out.push(r);
            }
        }
    }
    Ok(out)
}
