//! Positivity offsets.
//!
//! Every sanitizer adds a constant μ to its noise so that, with probability
//! at least 1 − β over all of its draws, no released count undershoots the
//! true count. The solvers below find the smallest such μ.

use serde::{Deserialize, Serialize};

use super::noise::{Epsilon, NoiseMode};
use crate::error::{invalid, Result};
use crate::sanitize::TreeShape;

/// Absolute precision of the continuous offset search.
pub const OFFSET_RESOLUTION: f64 = 1e-6;

/// A solved offset together with the guarantee it was solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetSolution {
    pub mu: f64,
    /// Number of independent noise draws the guarantee covers.
    pub draws: u64,
    pub beta: f64,
}

impl OffsetSolution {
    /// The offset rounded up to whole records.
    pub fn padding(&self) -> u64 {
        self.mu.ceil() as u64
    }
}

/// Which deviations of a draw count as failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Only draws below −μ fail (a single overcount per draw).
    Lower,
    /// Draws outside (−μ, μ) fail (a count and its complement both overcount).
    Both,
}

fn per_draw_failure(mode: NoiseMode, mu: f64, scale: f64, tail: Tail) -> f64 {
    let one_side = match mode {
        NoiseMode::Laplace | NoiseMode::Disabled => 0.5 * (-mu / scale).exp(),
        NoiseMode::Geometric => {
            // P(Z ≤ −(m + 1)) = α^(m+1) / (1 + α) with α = e^(−1/scale).
            let alpha = (-1.0 / scale).exp();
            alpha.powf(mu.floor() + 1.0) / (1.0 + alpha)
        }
    };
    match tail {
        Tail::Lower => one_side,
        Tail::Both => (2.0 * one_side).min(1.0),
    }
}

/// Whether `draws` draws shifted by `mu` all avoid failure with prob ≥ 1 − β.
fn positivity_holds(mode: NoiseMode, mu: f64, draws: u64, scale: f64, beta: f64, tail: Tail) -> bool {
    let fail = per_draw_failure(mode, mu, scale, tail);
    // (1 − fail)^draws ≥ 1 − β, in log space.
    draws as f64 * (-fail).ln_1p() >= (-beta).ln_1p()
}

fn check_common(draws: u64, scale: f64, beta: f64) -> Result<()> {
    if draws == 0 {
        return Err(invalid("offset needs at least one noise draw"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid(format!("noise scale must be positive, got {scale}")));
    }
    super::check_beta(beta)?;
    Ok(())
}

/// Minimal μ with (1 − ½e^(−μ/λ))^draws ≥ 1 − β, to [`OFFSET_RESOLUTION`].
pub fn solve_min_offset(draws: u64, scale: f64, beta: f64) -> Result<OffsetSolution> {
    solve_offset(NoiseMode::Laplace, draws, scale, beta, Tail::Lower)
}

/// Minimal positivity offset for the given noise mode and tail.
///
/// Geometric noise yields integers, so its offset is an integer as well.
pub fn solve_offset(
    mode: NoiseMode,
    draws: u64,
    scale: f64,
    beta: f64,
    tail: Tail,
) -> Result<OffsetSolution> {
    check_common(draws, scale, beta)?;
    let holds = |mu: f64| positivity_holds(mode, mu, draws, scale, beta, tail);
    let mu = match mode {
        NoiseMode::Geometric => min_integer(|m| holds(m as f64)) as f64,
        NoiseMode::Laplace | NoiseMode::Disabled => {
            if holds(0.0) {
                0.0
            } else {
                let (mut lo, mut hi) = (0.0, scale);
                while !holds(hi) {
                    lo = hi;
                    hi *= 2.0;
                }
                while hi - lo > OFFSET_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    };
    Ok(OffsetSolution { mu, draws, beta })
}

// Smallest m ≥ 0 with pred(m), for a monotone predicate.
fn min_integer(pred: impl Fn(u64) -> bool) -> u64 {
    if pred(0) {
        return 0;
    }
    let (mut lo, mut hi) = (0u64, 1u64);
    while !pred(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// P(X ≥ j) for X ~ Binomial(n, p), accurate in both tails.
pub fn binomial_upper_tail(n: u64, p: f64, j: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if j > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let nf = n as f64;
    if j as f64 > nf * p {
        // Terms decrease from k = j onwards; sum until negligible.
        let ln_choose: f64 = (0..j).map(|k| ((nf - k as f64) / (k as f64 + 1.0)).ln()).sum();
        let mut term = (ln_choose + j as f64 * ln_p + (nf - j as f64) * ln_q).exp();
        let mut sum = term;
        let odds = p / (1.0 - p);
        let mut k = j;
        while k < n && term > sum * 1e-18 {
            term *= (nf - k as f64) / (k as f64 + 1.0) * odds;
            sum += term;
            k += 1;
        }
        sum.min(1.0)
    } else {
        // The lower tail below the mean is at most about one half, so the
        // complement loses no precision.
        let mut ln_choose = 0.0;
        let mut cdf = 0.0;
        for k in 0..j {
            cdf += (ln_choose + k as f64 * ln_p + (nf - k as f64) * ln_q).exp();
            ln_choose += ((nf - k as f64) / (k as f64 + 1.0)).ln();
        }
        (1.0 - cdf).clamp(0.0, 1.0)
    }
}

/// Union bound on the probability that some bucket overflows by μ.
///
/// Term i bounds the event that at least i + 1 of the `nodes` tree draws
/// fall below −μ/(i + 1); a bucket count assembled from at most `terms`
/// noisy nodes can only undershoot by μ if one of these events occurs.
pub fn bucket_failure_bound(mu: f64, nodes: u64, terms: u64, scale: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..terms {
        let p = 0.5 * (-mu / (scale * (i as f64 + 1.0))).exp();
        total += binomial_upper_tail(nodes, p, i + 1);
        if total >= 1.0 {
            return 1.0;
        }
    }
    total
}

/// Minimal integer μ_b such that the bucket overflow bound is at most β.
///
/// The tree geometry (node count, cover bound, noise scale) is taken from
/// the same [`TreeShape`] the bucketization tree is built on.
pub fn solve_bucket_offset(
    arity: usize,
    domain: usize,
    epsilon: Epsilon,
    beta: f64,
) -> Result<OffsetSolution> {
    super::check_beta(beta)?;
    let shape = TreeShape::new(domain, arity)?;
    let scale = shape.noise_scale(epsilon);
    let nodes = shape.node_count() as u64;
    let terms = shape.max_cover() as u64;
    let mu = min_integer(|m| bucket_failure_bound(m as f64, nodes, terms, scale) <= beta);
    Ok(OffsetSolution {
        mu: mu as f64,
        draws: nodes,
        beta,
    })
}
