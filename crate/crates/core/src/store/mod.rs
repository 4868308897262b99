//! The atomic storage model: fixed-length records, a mock randomized
//! cipher, the server's data structure and its leakage recorder.

mod cipher;
mod record;
mod server;
mod trace;

pub use cipher::{
    decrypt, decrypt_record, encrypt, encrypt_dummy, encrypt_record, Ciphertext, SecretKey,
};
pub use record::{
    decode, encode, encode_dummy, plaintext_len, BitKey, Record, SearchKey, DEFAULT_PAYLOAD_LEN,
};
pub use server::{fetch_groups, upload_groups, Group, ServerStore};
pub use trace::{LeakageTrace, TraceEntry, TraceReport};
