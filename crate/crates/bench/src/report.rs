//! Machine-readable efficiency reports.

use std::io::Write;

use dpstore::Query;
use serde::{Deserialize, Serialize};

use crate::config::SystemKind;
use crate::error::Result;

/// Mean and sample standard deviation over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stddev: f64,
}

impl Summary {
    /// `None` for an empty sample; the deviation of a single value is 0.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary { mean, stddev })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub selectivity: Option<f64>,
    pub queries: usize,
    /// Queries with m > 0; only these enter `a`.
    pub nonempty_queries: usize,
    /// Communication efficiency a = m′/m, averaged per trial.
    pub a: Option<Summary>,
    /// Absolute m′ of queries with m = 0.
    pub empty_m_prime: Option<Summary>,
    /// Server buckets read per query (ciphertexts for atomic stores).
    pub physical_reads: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub group: usize,
    pub query: Query,
    pub m: usize,
    pub mean_m_prime: f64,
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub system: SystemKind,
    pub epsilon: f64,
    pub beta: f64,
    pub seed: u64,
    pub domain: u32,
    pub records: usize,
    pub trials: usize,
    /// Storage efficiency a = n′/n; absent when n = 0.
    pub storage_a: Option<Summary>,
    /// Stored record slots n′.
    pub stored_records: Summary,
    /// Ciphertext slots on the server, including ORAM tree slots.
    pub physical_slots: Summary,
    /// Σ m′ over every query of every trial; equals the traces' volume total.
    pub total_volume: u64,
    /// DP-ORAM queries whose released count fell below m.
    pub incidents: usize,
    pub groups: Vec<GroupReport>,
    pub queries: Vec<QueryReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    label: &'a str,
    selectivity: Option<f64>,
    queries: usize,
    nonempty_queries: usize,
    mean_a: Option<f64>,
    stddev_a: Option<f64>,
    mean_empty_m_prime: Option<f64>,
}

impl EfficiencyReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per group: selectivity, mean a and its deviation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for g in &self.groups {
            w.serialize(CsvRow {
                label: &g.label,
                selectivity: g.selectivity,
                queries: g.queries,
                nonempty_queries: g.nonempty_queries,
                mean_a: g.a.map(|s| s.mean),
                stddev_a: g.a.map(|s| s.stddev),
                mean_empty_m_prime: g.empty_m_prime.map(|s| s.mean),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean a per group, in group order.
    pub fn mean_a(&self) -> Vec<Option<f64>> {
        self.groups.iter().map(|g| g.a.map(|s| s.mean)).collect()
    }
}
