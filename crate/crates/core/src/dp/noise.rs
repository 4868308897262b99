use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A strictly positive, finite privacy parameter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Epsilon(value))
        } else {
            Err(invalid(format!("epsilon must be positive and finite, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Splits the budget by `fraction`, returning (fraction·ε, (1−fraction)·ε).
    pub fn split(self, fraction: f64) -> Result<(Epsilon, Epsilon)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(invalid(format!("budget split must lie in (0, 1), got {fraction}")));
        }
        Ok((Epsilon(self.0 * fraction), Epsilon(self.0 * (1.0 - fraction))))
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        Epsilon::new(v)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

/// Which distribution perturbs released counts.
///
/// `Geometric` is the discrete analogue of Laplace for integer counts; its
/// exact pmf makes privacy checkable by enumeration. `Disabled` keeps every
/// offset but draws zero noise and exists only for deterministic tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    Laplace,
    Geometric,
    Disabled,
}

impl NoiseMode {
    /// One zero-mean draw whose spread is calibrated to `scale` = Δ/ε.
    pub fn sample<R: Rng + ?Sized>(self, scale: f64, rng: &mut R) -> f64 {
        match self {
            NoiseMode::Laplace => laplace(0.0, scale, rng),
            NoiseMode::Geometric => geometric(1.0 / scale, rng) as f64,
            NoiseMode::Disabled => 0.0,
        }
    }
}

/// A noise distribution with its location and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub mean: f64,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn new(mode: NoiseMode, mean: f64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("noise scale must be positive, got {scale}")));
        }
        if mode == NoiseMode::Geometric && mean.fract() != 0.0 {
            return Err(invalid("two-sided geometric noise needs an integer mean"));
        }
        Ok(NoiseSpec { mode, mean, scale })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.mode.sample(self.scale, rng)
    }
}

/// Draws from Laplace(`mean`, `scale`) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(mean: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid(format!("Laplace scale must be positive, got {scale}")));
    }
    Ok(laplace(mean, scale, rng))
}

fn laplace<R: Rng + ?Sized>(mean: f64, scale: f64, rng: &mut R) -> f64 {
    // u in (-1/2, 1/2); the closed endpoint would map to -inf.
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    mean - scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// Draws Z with P(Z = z) ∝ exp(−t·|z|), where t = ε/Δ.
pub fn sample_two_sided_geometric<R: Rng + ?Sized>(
    epsilon_over_sensitivity: f64,
    rng: &mut R,
) -> Result<i64> {
    if !(epsilon_over_sensitivity.is_finite() && epsilon_over_sensitivity > 0.0) {
        return Err(invalid(format!(
            "geometric parameter must be positive, got {epsilon_over_sensitivity}"
        )));
    }
    Ok(geometric(epsilon_over_sensitivity, rng))
}

// Difference of two iid one-sided geometrics on {0, 1, ...}.
fn geometric<R: Rng + ?Sized>(t: f64, rng: &mut R) -> i64 {
    let one_sided = |rng: &mut R| -> i64 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        (-u.ln() / t).floor() as i64
    };
    one_sided(rng) - one_sided(rng)
}

/// Exact pmf ((1−α)/(1+α))·α^|z| with α = exp(−t).
pub fn two_sided_geometric_pmf(epsilon_over_sensitivity: f64, z: i64) -> f64 {
    let t = epsilon_over_sensitivity;
    // (1-α)/(1+α) = tanh(t/2), stable for small t.
    (t / 2.0).tanh() * (-t * z.unsigned_abs() as f64).exp()
}
