//! A mock authenticated cipher.
//!
//! ChaCha8 keystream XOR under a fresh random nonce, with a keyed SipHash-2-4
//! tag over nonce and body. It gives the protocol the right shape (fresh
//! randomness per encryption, equal lengths for equal-length plaintexts,
//! authenticated decryption) without claiming cryptographic strength.

use std::hash::Hasher;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use siphasher::sip128::{Hasher128, SipHasher24};

use super::record::{decode, encode, encode_dummy, Record};
use crate::error::{Error, Result};

/// Client-side secret key material.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    stream: [u8; 32],
    mac: [u8; 16],
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut key = SecretKey {
            stream: [0; 32],
            mac: [0; 16],
        };
        rng.fill_bytes(&mut key.stream);
        rng.fill_bytes(&mut key.mac);
        key
    }

    fn tag(&self, nonce: u64, body: &[u8]) -> [u8; 16] {
        let mut h = SipHasher24::new_with_key(&self.mac);
        h.write(&nonce.to_le_bytes());
        h.write(body);
        h.finish128().as_bytes()
    }

    fn apply_keystream(&self, nonce: u64, data: &mut [u8]) {
        let mut ks = ChaCha8Rng::from_seed(self.stream);
        ks.set_stream(nonce);
        let mut pad = vec![0u8; data.len()];
        ks.fill_bytes(&mut pad);
        for (d, p) in data.iter_mut().zip(pad) {
            *d ^= p;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub nonce: u64,
    pub body: Vec<u8>,
    pub tag: [u8; 16],
}

impl Ciphertext {
    /// Size on the wire.
    pub fn byte_len(&self) -> usize {
        8 + self.body.len() + 16
    }
}

pub fn encrypt<R: Rng + ?Sized>(key: &SecretKey, plaintext: &[u8], rng: &mut R) -> Ciphertext {
    let nonce = rng.next_u64();
    let mut body = plaintext.to_vec();
    key.apply_keystream(nonce, &mut body);
    let tag = key.tag(nonce, &body);
    Ciphertext { nonce, body, tag }
}

pub fn decrypt(key: &SecretKey, ct: &Ciphertext) -> Result<Vec<u8>> {
    if key.tag(ct.nonce, &ct.body) != ct.tag {
        return Err(Error::Authentication);
    }
    let mut body = ct.body.clone();
    key.apply_keystream(ct.nonce, &mut body);
    Ok(body)
}

pub fn encrypt_record<R: Rng + ?Sized>(
    key: &SecretKey,
    record: &Record,
    payload_len: usize,
    rng: &mut R,
) -> Result<Ciphertext> {
    Ok(encrypt(key, &encode(record, payload_len)?, rng))
}

pub fn encrypt_dummy<R: Rng + ?Sized>(key: &SecretKey, payload_len: usize, rng: &mut R) -> Ciphertext {
    encrypt(key, &encode_dummy(payload_len), rng)
}

/// Decrypts a record slot; `None` for a dummy.
pub fn decrypt_record(key: &SecretKey, ct: &Ciphertext) -> Result<Option<Record>> {
    decode(&decrypt(key, ct)?)
}
