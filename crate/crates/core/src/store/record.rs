use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default record payload length κ in bytes.
pub const DEFAULT_PAYLOAD_LEN: usize = 64;

/// A fixed-width bit vector over up to 64 binary attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitKey {
    bits: u64,
    len: u8,
}

impl BitKey {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > 64 {
            return Err(invalid(format!("bit keys hold at most 64 columns, got {len}")));
        }
        if len < 64 && bits >> len != 0 {
            return Err(invalid(format!("bits {bits:#x} exceed {len} columns")));
        }
        Ok(BitKey {
            bits,
            len: len as u8,
        })
    }

    pub fn from_bools(values: &[bool]) -> Result<Self> {
        let bits = values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        BitKey::new(bits, values.len())
    }

    pub fn empty() -> Self {
        BitKey::default()
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Value of column `i` (0-based).
    pub fn get(&self, column: usize) -> bool {
        column < self.len() && (self.bits >> column) & 1 == 1
    }
}

/// The key a query type searches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchKey {
    /// A position in the ordered domain [1, N], used by range and point queries.
    Ordered(u32),
    /// A binary attribute vector, used by attribute queries.
    Bits(BitKey),
}

/// A stored record: its search keys and an opaque payload of at most κ bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub key: u32,
    pub attributes: BitKey,
    pub payload: Vec<u8>,
}

impl Record {
    pub fn new(key: u32, payload: impl Into<Vec<u8>>) -> Self {
        Record {
            key,
            attributes: BitKey::empty(),
            payload: payload.into(),
        }
    }

    pub fn with_attributes(mut self, attributes: BitKey) -> Self {
        self.attributes = attributes;
        self
    }

    pub fn search_key(&self, ordered: bool) -> SearchKey {
        if ordered {
            SearchKey::Ordered(self.key)
        } else {
            SearchKey::Bits(self.attributes)
        }
    }
}

const TAG_DUMMY: u8 = 0;
const TAG_REAL: u8 = 1;
// kind, ordered key, column count, attribute bits, payload length.
const HEADER_LEN: usize = 1 + 4 + 1 + 8 + 2;

/// Length of every encoded plaintext for payload length κ.
pub fn plaintext_len(payload_len: usize) -> usize {
    HEADER_LEN + payload_len
}

/// Encodes a record into a fixed-length plaintext, padding the payload to κ.
pub fn encode(record: &Record, payload_len: usize) -> Result<Vec<u8>> {
    if record.payload.len() > payload_len || payload_len > u16::MAX as usize {
        return Err(invalid(format!(
            "payload of {} bytes exceeds record length {payload_len}",
            record.payload.len()
        )));
    }
    let mut out = Vec::with_capacity(plaintext_len(payload_len));
    out.push(TAG_REAL);
    out.extend_from_slice(&record.key.to_le_bytes());
    out.push(record.attributes.len);
    out.extend_from_slice(&record.attributes.bits.to_le_bytes());
    out.extend_from_slice(&(record.payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&record.payload);
    out.resize(plaintext_len(payload_len), 0);
    Ok(out)
}

/// The dummy plaintext: all zero, including the kind tag.
pub fn encode_dummy(payload_len: usize) -> Vec<u8> {
    let mut out = vec![0u8; plaintext_len(payload_len)];
    out[0] = TAG_DUMMY;
    out
}

/// Decodes a plaintext; `None` marks a dummy.
pub fn decode(plain: &[u8]) -> Result<Option<Record>> {
    if plain.len() < HEADER_LEN {
        return Err(invalid("plaintext shorter than record header"));
    }
    match plain[0] {
        TAG_DUMMY => Ok(None),
        TAG_REAL => {
            let key = u32::from_le_bytes(plain[1..5].try_into().unwrap());
            let columns = plain[5] as usize;
            let bits = u64::from_le_bytes(plain[6..14].try_into().unwrap());
            let len = u16::from_le_bytes(plain[14..16].try_into().unwrap()) as usize;
            if HEADER_LEN + len > plain.len() {
                return Err(invalid("payload length exceeds plaintext"));
            }
            Ok(Some(Record {
                key,
                attributes: BitKey::new(bits, columns)?,
                payload: plain[HEADER_LEN..HEADER_LEN + len].to_vec(),
            }))
        }
        other => Err(invalid(format!("unknown record tag {other}"))),
    }
}
