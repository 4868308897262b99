use rand::Rng;
use serde::{Deserialize, Serialize};

use super::release;
use crate::dp::{solve_offset, DpParams, Tail};
use crate::error::{invalid, Error, Result};
use crate::store::BitKey;

/// Noisy per-column counts of ones and zeros over k binary attributes.
///
/// One noisy count q̂_i per column serves both answers: the zeros are
/// released as n − q̂_i, so a single draw must be accurate in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyAttributeIndex {
    ones: Vec<i64>,
    zeros: Vec<i64>,
    offset: u64,
    epsilon: f64,
    beta: f64,
}

impl NoisyAttributeIndex {
    /// Builds the index over `columns` attributes with noise scale k/ε.
    ///
    /// The record count n is treated as public.
    pub fn build<R: Rng + ?Sized>(
        keys: &[BitKey],
        columns: usize,
        params: DpParams,
        rng: &mut R,
    ) -> Result<Self> {
        if columns == 0 || columns > 64 {
            return Err(invalid(format!("attribute columns must be in 1..=64, got {columns}")));
        }
        let mut truth = vec![0i64; columns];
        for key in keys {
            if key.len() != columns {
                return Err(invalid(format!(
                    "attribute key has {} columns, expected {columns}",
                    key.len()
                )));
            }
            for (c, t) in truth.iter_mut().enumerate() {
                *t += i64::from(key.get(c));
            }
        }
        let n = keys.len() as i64;
        let scale = columns as f64 / params.epsilon.value();
        let offset = solve_offset(params.noise, columns as u64, scale, params.beta, Tail::Both)?
            .padding();
        let mu = offset as f64;
        let mut ones = Vec::with_capacity(columns);
        let mut zeros = Vec::with_capacity(columns);
        for &q in &truth {
            let noisy = q as f64 + params.noise.sample(scale, rng);
            ones.push(release(noisy + mu));
            zeros.push(release(n as f64 - noisy + mu));
        }
        for (c, &q) in truth.iter().enumerate() {
            for (slot, released, actual) in [(2 * c, ones[c], q), (2 * c + 1, zeros[c], n - q)] {
                if released < actual {
                    return Err(Error::Undershoot {
                        slot,
                        released,
                        actual,
                    });
                }
            }
        }
        Ok(NoisyAttributeIndex {
            ones,
            zeros,
            offset,
            epsilon: params.epsilon.value(),
            beta: params.beta,
        })
    }

    pub fn columns(&self) -> usize {
        self.ones.len()
    }

    /// Released overcount of records whose `column` equals `value`.
    pub fn count(&self, column: usize, value: bool) -> Result<i64> {
        if column >= self.columns() {
            return Err(invalid(format!(
                "attribute column {column} outside 0..{}",
                self.columns()
            )));
        }
        Ok(if value { self.ones[column] } else { self.zeros[column] })
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}
