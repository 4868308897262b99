use rand::Rng;
use serde::{Deserialize, Serialize};

use super::release;
use crate::dp::{solve_offset, DpParams, Tail};
use crate::error::{invalid, Error, Result};

/// Exact record counts per domain position 1..=N.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
}

impl Histogram {
    pub fn new(bins: Vec<u64>) -> Self {
        Histogram { bins }
    }

    /// Counts keys in `[1, domain]`; any other key is an error.
    pub fn from_keys(keys: &[u32], domain: usize) -> Result<Self> {
        let mut bins = vec![0u64; domain];
        for &k in keys {
            if k == 0 || k as usize > domain {
                return Err(invalid(format!("key {k} outside domain [1, {domain}]")));
            }
            bins[k as usize - 1] += 1;
        }
        Ok(Histogram { bins })
    }

    pub fn domain(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    /// Count at 1-based position `key`.
    pub fn count(&self, key: usize) -> u64 {
        self.bins[key - 1]
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn signed(&self) -> Vec<i64> {
        self.bins.iter().map(|&c| c as i64).collect()
    }

    /// Exact prefix counts: entry j counts keys in [1, j + 1].
    pub fn cumulative(&self) -> Vec<u64> {
        self.bins
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }
}

/// Per-bin overcounts released with the Laplace perturbation algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyHistogram {
    released: Vec<i64>,
    offset: u64,
    epsilon: f64,
    beta: f64,
}

impl NoisyHistogram {
    /// Releases ⌈count + noise + μ_p⌉ per bin, with μ_p covering all N bins.
    ///
    /// Fails with [`Error::Undershoot`] if some bin still falls below its true
    /// count (probability at most β).
    pub fn build<R: Rng + ?Sized>(hist: &Histogram, params: DpParams, rng: &mut R) -> Result<Self> {
        if hist.domain() == 0 {
            return Err(invalid("histogram domain must be non-empty"));
        }
        let scale = 1.0 / params.epsilon.value();
        let offset = solve_offset(
            params.noise,
            hist.domain() as u64,
            scale,
            params.beta,
            Tail::Lower,
        )?
        .padding();
        let noisy = Self::with_offset(&hist.signed(), params, offset, rng);
        for (slot, (&released, &actual)) in noisy.released.iter().zip(hist.bins()).enumerate() {
            if released < actual as i64 {
                return Err(Error::Undershoot {
                    slot,
                    released,
                    actual: actual as i64,
                });
            }
        }
        Ok(noisy)
    }

    /// Releases signed counts with a caller-chosen offset and no undershoot check.
    pub fn with_offset<R: Rng + ?Sized>(
        counts: &[i64],
        params: DpParams,
        offset: u64,
        rng: &mut R,
    ) -> Self {
        let scale = 1.0 / params.epsilon.value();
        let released = counts
            .iter()
            .map(|&c| release(c as f64 + params.noise.sample(scale, rng) + offset as f64))
            .collect();
        NoisyHistogram {
            released,
            offset,
            epsilon: params.epsilon.value(),
            beta: params.beta,
        }
    }

    pub fn released(&self) -> &[i64] {
        &self.released
    }

    /// Released overcount at 1-based position `key`.
    pub fn count(&self, key: usize) -> Result<i64> {
        if key == 0 || key > self.released.len() {
            return Err(invalid(format!(
                "point {key} outside domain [1, {}]",
                self.released.len()
            )));
        }
        Ok(self.released[key - 1])
    }

    pub fn domain(&self) -> usize {
        self.released.len()
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
