//! Deterministic query workloads.

use dpstore::Query;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::WorkloadSpec;

/// Queries averaged together in a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub label: String,
    pub selectivity: Option<f64>,
    pub queries: Vec<Query>,
}

/// Every point query on [1, N].
pub fn all_points(domain: u32) -> Vec<Query> {
    (1..=domain).map(|key| Query::Point { key }).collect()
}

/// Range length ⌈s·N⌉, clamped to [1, N].
pub fn range_len(domain: u32, selectivity: f64) -> u32 {
    // Guards against products such as 0.7·10 = 7.000000000000001.
    ((selectivity * f64::from(domain) - 1e-9).ceil().max(1.0) as u32).min(domain)
}

/// Every range of length ⌈s·N⌉, by starting position.
pub fn ranges_at(domain: u32, selectivity: f64) -> Vec<Query> {
    let len = range_len(domain, selectivity);
    (1..=domain - len + 1)
        .map(|lo| Query::Range { lo, hi: lo + len - 1 })
        .collect()
}

/// Both values of every attribute column: 2k queries.
pub fn all_attributes(columns: usize) -> Vec<Query> {
    (0..columns)
        .flat_map(|column| [true, false].map(|value| Query::Attribute { column, value }))
        .collect()
}

/// Keeps `max` queries chosen uniformly, in their original order.
pub fn subsample<R: Rng + ?Sized>(queries: Vec<Query>, max: usize, rng: &mut R) -> Vec<Query> {
    if queries.len() <= max {
        return queries;
    }
    let mut keep = sample(rng, queries.len(), max).into_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| queries[i]).collect()
}

pub fn build<R: Rng + ?Sized>(
    spec: &WorkloadSpec,
    domain: u32,
    columns: usize,
    max_queries: Option<usize>,
    rng: &mut R,
) -> Vec<QueryGroup> {
    let groups = match spec {
        WorkloadSpec::AllPoints => vec![QueryGroup {
            label: "points".into(),
            selectivity: None,
            queries: all_points(domain),
        }],
        WorkloadSpec::Ranges { selectivities } => selectivities
            .iter()
            .map(|&s| QueryGroup {
                label: format!("s={s}"),
                selectivity: Some(s),
                queries: ranges_at(domain, s),
            })
            .collect(),
        WorkloadSpec::AllAttributes => vec![QueryGroup {
            label: "attributes".into(),
            selectivity: None,
            queries: all_attributes(columns),
        }],
    };
    match max_queries {
        Some(max) => groups
            .into_iter()
            .map(|g| QueryGroup {
                queries: subsample(g.queries, max, rng),
                ..g
            })
            .collect(),
        None => groups,
    }
}
