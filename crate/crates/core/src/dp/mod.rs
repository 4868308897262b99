//! Noise samplers, positivity offsets and the privacy-budget ledger.

mod budget;
mod noise;
mod offset;

pub use budget::{Charge, Composition, PrivacyBudget};
pub use noise::{
    sample_laplace, sample_two_sided_geometric, two_sided_geometric_pmf, Epsilon, NoiseMode,
    NoiseSpec,
};
pub use offset::{
    binomial_upper_tail, bucket_failure_bound, solve_bucket_offset, solve_min_offset,
    solve_offset, OffsetSolution, Tail, OFFSET_RESOLUTION,
};

use crate::error::{invalid, Result};

/// Privacy and confidence parameters shared by every sanitizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DpParams {
    pub epsilon: Epsilon,
    /// Probability that some released count undershoots its true value.
    pub beta: f64,
    pub noise: NoiseMode,
}

impl DpParams {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        Ok(DpParams {
            epsilon: Epsilon::new(epsilon)?,
            beta: check_beta(beta)?,
            noise: NoiseMode::Laplace,
        })
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    /// Same confidence and noise mode with a different budget.
    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// β must lie in (0, 1]; β = 1 requests no positivity guarantee at all.
pub fn check_beta(beta: f64) -> Result<f64> {
    if beta.is_finite() && beta > 0.0 && beta <= 1.0 {
        Ok(beta)
    } else {
        Err(invalid(format!("beta must lie in (0, 1], got {beta}")))
    }
}
