use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::store::Record;

/// The query types a store can answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Range,
    Point,
    Attribute,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [QueryKind::Range, QueryKind::Point, QueryKind::Attribute];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Range => "range",
            QueryKind::Point => "point",
            QueryKind::Attribute => "attribute",
        }
    }
}

/// A selection over the stored records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Query {
    /// Ordered keys in `[lo, hi]`, both inclusive.
    Range { lo: u32, hi: u32 },
    /// Ordered key equal to `key`.
    Point { key: u32 },
    /// Attribute `column` (0-based) equal to `value`.
    Attribute { column: usize, value: bool },
}

impl Query {
    pub fn kind(&self) -> QueryKind {
        match self {
            Query::Range { .. } => QueryKind::Range,
            Query::Point { .. } => QueryKind::Point,
            Query::Attribute { .. } => QueryKind::Attribute,
        }
    }

    pub fn matches(&self, record: &Record) -> bool {
        match *self {
            Query::Range { lo, hi } => lo <= record.key && record.key <= hi,
            Query::Point { key } => record.key == key,
            Query::Attribute { column, value } => record.attributes.get(column) == value,
        }
    }

    /// Checks the query against an ordered domain of size `domain` and
    /// `columns` attributes.
    pub fn validate(&self, domain: u32, columns: usize) -> Result<()> {
        let ok = match *self {
            Query::Range { lo, hi } => 1 <= lo && lo <= hi && hi <= domain,
            Query::Point { key } => 1 <= key && key <= domain,
            Query::Attribute { column, .. } => column < columns,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "query {self:?} outside domain [1, {domain}] with {columns} attribute columns"
            )))
        }
    }

    /// Plaintext answer by linear scan.
    pub fn filter<'a>(&self, records: impl IntoIterator<Item = &'a Record>) -> Vec<Record> {
        records.into_iter().filter(|r| self.matches(r)).cloned().collect()
    }
}
