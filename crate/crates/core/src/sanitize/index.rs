use serde::{Deserialize, Serialize};

use super::{NoisyAttributeIndex, NoisyHistogram, NoisyTree};
use crate::error::{Error, Result};
use crate::query::{Query, QueryKind};

/// A sanitized structure together with its overcounting answer rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SanitizedIndex {
    Range(NoisyTree),
    Point(NoisyHistogram),
    Attribute(NoisyAttributeIndex),
}

impl SanitizedIndex {
    pub fn kind(&self) -> QueryKind {
        match self {
            SanitizedIndex::Range(_) => QueryKind::Range,
            SanitizedIndex::Point(_) => QueryKind::Point,
            SanitizedIndex::Attribute(_) => QueryKind::Attribute,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            SanitizedIndex::Range(t) => t.epsilon(),
            SanitizedIndex::Point(h) => h.epsilon(),
            SanitizedIndex::Attribute(a) => a.epsilon(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            SanitizedIndex::Range(t) => t.beta(),
            SanitizedIndex::Point(h) => h.beta(),
            SanitizedIndex::Attribute(a) => a.beta(),
        }
    }

    /// Largest offset folded into any single answer.
    pub fn alpha(&self) -> f64 {
        match self {
            SanitizedIndex::Range(t) => t.offset() * t.shape().max_cover() as f64,
            SanitizedIndex::Point(h) => h.offset() as f64,
            SanitizedIndex::Attribute(a) => a.offset() as f64,
        }
    }

    /// Overcount of the records matching `q`.
    pub fn answer(&self, q: &Query) -> Result<i64> {
        match (self, *q) {
            (SanitizedIndex::Range(t), Query::Range { lo, hi }) => {
                t.range_count(lo as usize, hi as usize)
            }
            (SanitizedIndex::Point(h), Query::Point { key }) => h.count(key as usize),
            (SanitizedIndex::Attribute(a), Query::Attribute { column, value }) => {
                a.count(column, value)
            }
            _ => Err(Error::Unsupported(format!(
                "{} index cannot answer {} queries",
                self.kind().name(),
                q.kind().name()
            ))),
        }
    }
}
