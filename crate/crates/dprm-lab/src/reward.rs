//! Scalar reward signals derived from preference distributions.
//!
//! A predicted distribution collapses to the reward-weighted sum over
//! categories; policy optimization then maximizes that scalar minus a
//! KL penalty against a frozen reference. [`ideal_distance`] measures how
//! far a distribution sits from the one-hot on the best category — under
//! the reward-difference cost its ordering is exactly opposite to the
//! expected-reward ordering, which is what makes the scalar signal safe
//! to optimize.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::{CategorySchema, PreferenceDistribution};
use crate::transport::{wasserstein_p, CostMatrix};

/// The assembled per-sample training signal, kept with its parts for audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSignal {
    pub expected: f64,
    pub kl: f64,
    pub beta: f64,
    pub total: f64,
}

/// Default KL coefficient for the total-reward signal.
pub const DEFAULT_BETA: f64 = 0.1;

/// Reward-weighted sum over the distribution: `sum_i dist[i] * reward_i`.
pub fn expected_reward(dist: &PreferenceDistribution, schema: &CategorySchema) -> Result<f64> {
    if dist.len() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            got: dist.len(),
        });
    }
    Ok(dist
        .probs()
        .iter()
        .zip(schema.categories())
        .map(|(&p, cat)| p * cat.reward)
        .sum())
}

/// `KL(p || q) = sum_i p_i ln(p_i / q_i)`; requires `q > 0` wherever `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::SupportMismatch { index, p: pi });
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// Compose the total reward `expected - beta * kl` with its parts recorded.
pub fn total_reward(expected: f64, kl: f64, beta: f64) -> Result<RewardSignal> {
    if kl < 0.0 {
        return Err(Error::NegativeKL(kl));
    }
    if beta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    Ok(RewardSignal {
        expected,
        kl,
        beta,
        total: expected - beta * kl,
    })
}

/// `W_p` between a distribution and the one-hot on the maximum-reward
/// category, under the reward-difference cost. Smaller means closer to the
/// unanimously-ideal verdict.
pub fn ideal_distance(
    dist: &PreferenceDistribution,
    schema: &CategorySchema,
    p: f64,
) -> Result<f64> {
    ideal_distance_with_cost(dist, schema, &CostMatrix::from_schema(schema), p)
}

/// [`ideal_distance`] under an explicit cost matrix; used by fault-injection
/// harnesses that deliberately break the reward-difference structure.
pub fn ideal_distance_with_cost(
    dist: &PreferenceDistribution,
    schema: &CategorySchema,
    cost: &CostMatrix,
    p: f64,
) -> Result<f64> {
    let ideal = PreferenceDistribution::one_hot(schema.len(), schema.ideal_index());
    wasserstein_p(dist, &ideal, cost, p)
}
