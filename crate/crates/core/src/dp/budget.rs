use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::noise::Epsilon;
use crate::error::{Error, Result};

// Absorbs float rounding when charges add up exactly to the total.
const TOLERANCE: f64 = 1e-12;

/// How a charge composes with the rest of the ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Mechanisms over the same data: budgets add up.
    Sequential,
    /// Mechanisms over disjoint parts of the data: a group costs its maximum.
    Parallel { group: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub epsilon: f64,
    pub composition: Composition,
}

/// Privacy accountant over a fixed total ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    total: Epsilon,
    ledger: Vec<Charge>,
}

impl PrivacyBudget {
    pub fn new(total: Epsilon) -> Self {
        PrivacyBudget {
            total,
            ledger: Vec::new(),
        }
    }

    pub fn total(&self) -> Epsilon {
        self.total
    }

    pub fn ledger(&self) -> &[Charge] {
        &self.ledger
    }

    /// Budget consumed by the ledger so far.
    pub fn spent(&self) -> f64 {
        spent_of(&self.ledger)
    }

    pub fn remaining(&self) -> f64 {
        (self.total.value() - self.spent()).max(0.0)
    }

    /// Records a charge, leaving the ledger untouched if it would overspend.
    pub fn charge(
        &mut self,
        label: impl Into<String>,
        epsilon: Epsilon,
        composition: Composition,
    ) -> Result<()> {
        let label = label.into();
        let before = self.spent();
        self.ledger.push(Charge {
            label: label.clone(),
            epsilon: epsilon.value(),
            composition,
        });
        let after = self.spent();
        if after > self.total.value() + TOLERANCE {
            self.ledger.pop();
            return Err(Error::BudgetExceeded {
                label,
                requested: after - before,
                remaining: (self.total.value() - before).max(0.0),
            });
        }
        Ok(())
    }

    /// Convenience for the common sequential case.
    pub fn charge_sequential(&mut self, label: impl Into<String>, epsilon: Epsilon) -> Result<()> {
        self.charge(label, epsilon, Composition::Sequential)
    }
}

fn spent_of(ledger: &[Charge]) -> f64 {
    let mut sequential = 0.0;
    let mut groups: BTreeMap<&str, f64> = BTreeMap::new();
    for c in ledger {
        match &c.composition {
            Composition::Sequential => sequential += c.epsilon,
            Composition::Parallel { group } => {
                let slot = groups.entry(group.as_str()).or_insert(0.0);
                *slot = slot.max(c.epsilon);
            }
        }
    }
    sequential + groups.values().sum::<f64>()
}
