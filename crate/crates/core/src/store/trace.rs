use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// What the server observes for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub query_id: u64,
    /// Ciphertext indices (atomic stores) or ORAM leaves (DP-ORAM) touched.
    pub indices: Vec<usize>,
    /// Records returned: the communication volume.
    pub m_prime: usize,
}

/// Server-side log of access patterns and communication volumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageTrace {
    entries: Vec<TraceEntry>,
    keep_indices: bool,
    next_id: u64,
}

impl Default for LeakageTrace {
    fn default() -> Self {
        LeakageTrace::new()
    }
}

impl LeakageTrace {
    pub fn new() -> Self {
        LeakageTrace {
            entries: Vec::new(),
            keep_indices: true,
            next_id: 0,
        }
    }

    /// A trace that keeps volumes but drops index lists, for large benchmarks.
    pub fn volumes_only() -> Self {
        LeakageTrace {
            keep_indices: false,
            ..LeakageTrace::new()
        }
    }

    pub fn keeps_indices(&self) -> bool {
        self.keep_indices
    }

    /// Appends one query's observation and returns its id.
    pub fn record(&mut self, indices: &[usize], m_prime: usize) -> u64 {
        let query_id = self.next_id;
        self.next_id += 1;
        self.entries.push(TraceEntry {
            query_id,
            indices: if self.keep_indices { indices.to_vec() } else { Vec::new() },
            m_prime,
        });
        query_id
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total communication volume over all queries.
    pub fn total_volume(&self) -> usize {
        self.entries.iter().map(|e| e.m_prime).sum()
    }

    pub fn report(&self) -> TraceReport {
        TraceReport {
            access: self.entries.iter().map(|e| e.indices.clone()).collect(),
            volume: self.entries.iter().map(|e| e.m_prime).collect(),
        }
    }

    /// One JSON object per query: `{query_id, indices, m_prime}`.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Per-query access patterns and volumes, in query order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub access: Vec<Vec<usize>>,
    pub volume: Vec<usize>,
}

impl TraceReport {
    /// Report of two sessions run back to back.
    pub fn concat(mut self, other: TraceReport) -> TraceReport {
        self.access.extend(other.access);
        self.volume.extend(other.volume);
        self
    }
}
