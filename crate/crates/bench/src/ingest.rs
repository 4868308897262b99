//! CSV ingestion with key discretization.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use dpstore::{BitKey, Record};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// How raw key values map onto [1, N].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Keys are already integers in [1, N].
    #[default]
    Direct,
    /// N equal-width bins spanning [min, max].
    EqualWidth,
    /// Bin by rank, so each bin holds about n/N records; ties share a bin.
    Quantile,
}

impl FromStr for Binning {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Binning::Direct),
            "equal-width" => Ok(Binning::EqualWidth),
            "quantile" => Ok(Binning::Quantile),
            _ => Err(format!("unknown binning {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub key_column: String,
    pub domain: u32,
    pub binning: Binning,
    /// 0/1 columns forming the attribute vector, in order.
    pub attribute_columns: Vec<String>,
    /// κ: each row, comma-joined, is truncated to this many bytes.
    pub payload_len: usize,
}

impl IngestSpec {
    pub fn new(key_column: impl Into<String>, domain: u32) -> Self {
        IngestSpec {
            key_column: key_column.into(),
            domain,
            binning: Binning::Direct,
            attribute_columns: Vec::new(),
            payload_len: dpstore::store::DEFAULT_PAYLOAD_LEN,
        }
    }
}

pub fn ingest_csv(path: &Path, spec: &IngestSpec) -> Result<Vec<Record>> {
    ingest_reader(File::open(path)?, spec)
}

/// Reads a headed CSV. Row numbers in errors count the header as row 1.
pub fn ingest_reader<R: Read>(input: R, spec: &IngestSpec) -> Result<Vec<Record>> {
    if spec.domain == 0 {
        return Err(BenchError::Invalid("domain must be positive".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| BenchError::Invalid(format!("no column named {name:?}")))
    };
    let key_col = column(&spec.key_column)?;
    let attr_cols: Vec<usize> = spec
        .attribute_columns
        .iter()
        .map(|c| column(c))
        .collect::<Result<_>>()?;

    let mut bad = Vec::new();
    let mut raw = Vec::with_capacity(rows.len());
    let mut attrs = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let key = row.get(key_col).map(str::trim).and_then(|v| v.parse::<f64>().ok());
        let bits: Option<Vec<bool>> = attr_cols
            .iter()
            .map(|&c| match row.get(c).map(str::trim) {
                Some("1") | Some("true") => Some(true),
                Some("0") | Some("false") => Some(false),
                _ => None,
            })
            .collect();
        match (key, bits) {
            (Some(k), Some(b)) if k.is_finite() => {
                raw.push(k);
                attrs.push(b);
            }
            _ => bad.push(i + 2),
        }
    }
    if !bad.is_empty() {
        return Err(BenchError::Rows {
            rows: bad,
            reason: "non-numeric key or non-binary attribute".into(),
        });
    }

    let keys = discretize(&raw, spec.domain, spec.binning).map_err(|rows| BenchError::Rows {
        rows: rows.into_iter().map(|i| i + 2).collect(),
        reason: format!("key outside domain [1, {}]", spec.domain),
    })?;
    rows.iter()
        .zip(keys)
        .zip(attrs)
        .map(|((row, key), bits)| {
            let mut payload = row.iter().collect::<Vec<_>>().join(",").into_bytes();
            payload.truncate(spec.payload_len);
            Ok(Record::new(key, payload).with_attributes(BitKey::from_bools(&bits)?))
        })
        .collect()
}

/// Maps raw values to [1, N]; on failure returns the offending row indices.
pub fn discretize(values: &[f64], domain: u32, binning: Binning) -> std::result::Result<Vec<u32>, Vec<usize>> {
    let n = domain as f64;
    match binning {
        Binning::Direct => {
            let bad: Vec<usize> = values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v.fract() != 0.0 || v < 1.0 || v > n)
                .map(|(i, _)| i)
                .collect();
            if bad.is_empty() {
                Ok(values.iter().map(|&v| v as u32).collect())
            } else {
                Err(bad)
            }
        }
        Binning::EqualWidth => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = hi - lo;
            Ok(values
                .iter()
                .map(|&v| {
                    if width == 0.0 {
                        1
                    } else {
                        ((((v - lo) / width) * n).floor() as u32 + 1).min(domain)
                    }
                })
                .collect())
        }
        Binning::Quantile => {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let mut keys = vec![0u32; values.len()];
            let mut rank = 0;
            for (pos, &i) in order.iter().enumerate() {
                if pos == 0 || values[i] != values[order[pos - 1]] {
                    rank = pos;
                }
                keys[i] = ((rank as f64 * n / values.len() as f64).floor() as u32 + 1).min(domain);
            }
            Ok(keys)
        }
    }
}
