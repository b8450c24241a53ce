//! The distributional preference reward model.
//!
//! A deterministic featurizer maps a prompt-response pair to a fixed vector,
//! and a linear-softmax head maps that vector to a predicted preference
//! distribution. Three loss variants train the head against target
//! distributions: plain cross-entropy, Wasserstein distance over the index
//! metric, and optimal transport over the reward-difference cost. Transport
//! losses see the geometry of the category space — mass predicted in a
//! far-away category costs more than mass predicted next door — which is
//! exactly what cross-entropy cannot express.

mod featurize;
mod train;

pub use featurize::{FeatureVector, Featurizer, FeaturizerConfig, DEFAULT_FEATURE_DIM};
pub use train::{evaluate, train, EpochRow, EvalMetrics, LossCurve, Split, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::PreferenceDistribution;
use crate::transport::{
    entropic_objective, solve_exact, solve_sinkhorn, wasserstein_p, CostMatrix,
};

/// Predictions are clamped at this floor before `ln` in the CE loss.
pub const CE_CLAMP: f64 = 1e-12;

/// Sinkhorn parameters used on the differentiable loss path. Iterations
/// are budget-bounded: heavily saturated predictions can make the final
/// decades of convergence crawl, and gradient descent does not need them —
/// when the cap fires the last iterate is used as-is.
pub const TRAIN_SINKHORN_TOL: f64 = 1e-9;
pub const TRAIN_SINKHORN_MAX_ITER: usize = 100_000;

/// A Sinkhorn solve that tolerates hitting the iteration cap by taking the
/// carried last iterate; real input errors still propagate.
fn sinkhorn_budget(
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    cost: &CostMatrix,
    eps: f64,
) -> Result<(
    crate::transport::TransportPlan,
    crate::transport::DualPotentials,
)> {
    match solve_sinkhorn(
        pred,
        target,
        cost,
        eps,
        TRAIN_SINKHORN_TOL,
        TRAIN_SINKHORN_MAX_ITER,
    ) {
        Ok(sol) => Ok((sol.plan, sol.potentials)),
        Err(Error::NoConvergence { last, .. }) => Ok((last.plan, last.potentials)),
        Err(e) => Err(e),
    }
}

/// Which objective trains the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    W,
    Ot,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::Ce => write!(f, "ce"),
            LossKind::W => write!(f, "w"),
            LossKind::Ot => write!(f, "ot"),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" => Ok(LossKind::Ce),
            "w" => Ok(LossKind::W),
            "ot" => Ok(LossKind::Ot),
            other => Err(Error::InvalidParameter(format!(
                "unknown loss kind {other:?} (expected ce, w, or ot)"
            ))),
        }
    }
}

/// Provenance of a training record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Helpfulness,
    Harmlessness,
    Synthetic,
}

/// One dataset row: a prompt-response pair with its target preference
/// distribution and the population count behind that target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub id: String,
    pub prompt: String,
    pub response: String,
    pub target: PreferenceDistribution,
    pub group_size: u64,
    #[serde(rename = "source")]
    pub source_tag: SourceTag,
    /// Set when the target was a one-hot that targeted smoothing tempered.
    #[serde(default, skip_serializing_if = "is_false")]
    pub smoothed: bool,
    /// Set when the prior panel could not be made to rank chosen above
    /// rejected within the resampling budget.
    #[serde(default, skip_serializing_if = "is_false")]
    pub inconsistent: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Serialize records as JSON Lines, one record per line, trailing newline.
pub fn records_to_jsonl(records: &[PreferenceRecord]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse JSON Lines into records, reporting the 1-based line number on the
/// first malformed line and rejecting duplicate ids.
pub fn records_from_jsonl(text: &str) -> Result<Vec<PreferenceRecord>> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PreferenceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("duplicate record id {:?}", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// The trainable feature-to-simplex mapping: a linear layer plus softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct DistHead {
    feature_dim: usize,
    d: usize,
    /// Row-major F x d weights: `weights[f * d + k]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DistHead {
    /// Zero-initialized head: predicts the uniform distribution everywhere.
    pub fn zeros(feature_dim: usize, d: usize) -> Self {
        Self {
            feature_dim,
            d,
            weights: vec![0.0; feature_dim * d],
            bias: vec![0.0; d],
        }
    }

    pub fn from_parts(
        feature_dim: usize,
        d: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != feature_dim * d {
            return Err(Error::DimensionMismatch {
                expected: feature_dim * d,
                got: weights.len(),
            });
        }
        if bias.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bias.len(),
            });
        }
        Ok(Self {
            feature_dim,
            d,
            weights,
            bias,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn out_dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        let mut z = self.bias.clone();
        for (f, &x) in features.values().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[f * self.d..(f + 1) * self.d];
            for (k, &w) in row.iter().enumerate() {
                z[k] += w * x;
            }
        }
        Ok(z)
    }

    /// Predicted preference distribution: `softmax(W x + b)`.
    pub fn predict(&self, features: &FeatureVector) -> Result<PreferenceDistribution> {
        Ok(softmax(&self.logits(features)?))
    }

    pub(crate) fn apply_gradient(&mut self, grad_w: &[f64], grad_b: &[f64], lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad_w) {
            *w -= lr * g;
        }
        for (b, g) in self.bias.iter_mut().zip(grad_b) {
            *b -= lr * g;
        }
    }
}

/// Numerically safe softmax onto the simplex.
pub fn softmax(logits: &[f64]) -> PreferenceDistribution {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    PreferenceDistribution::from_normalized(exps.iter().map(|&e| e / total).collect())
}

/// Cross-entropy `-sum_i t_i ln(max(s_i, 1e-12))`.
pub fn loss_ce(pred: &PreferenceDistribution, target: &PreferenceDistribution) -> f64 {
    pred.probs()
        .iter()
        .zip(target.probs())
        .map(|(&s, &t)| {
            if t > 0.0 {
                -t * s.max(CE_CLAMP).ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// Transport cost between prediction and target. `differentiable = false`
/// solves the exact LP; `true` runs Sinkhorn at `eps` and reports the sharp
/// cost `<T, M>` of the regularized plan.
pub fn loss_ot(
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    cost: &CostMatrix,
    differentiable: bool,
    eps: f64,
) -> Result<f64> {
    if differentiable {
        let (plan, _) = sinkhorn_budget(pred, target, cost, eps)?;
        Ok(plan.cost)
    } else {
        let (plan, _) = solve_exact(pred, target, cost)?;
        Ok(plan.cost)
    }
}

/// `W_p` between prediction and target over the index-distance ground
/// metric `|i - j|` — the cost convention for the Wasserstein baseline.
pub fn loss_w(
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    p: f64,
) -> Result<f64> {
    let cost = CostMatrix::index_distance(pred.len());
    wasserstein_p(pred, target, &cost, p)
}

/// The smooth objective actually differentiated on the transport training
/// path: `<T, M> + eps * sum T (ln T - 1)` at the Sinkhorn optimum. Its
/// gradient in the prediction is the Sinkhorn source potential, so analytic
/// gradients and finite differences of this quantity agree.
pub fn ot_training_objective(
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    cost: &CostMatrix,
    eps: f64,
) -> Result<f64> {
    let (plan, _) = sinkhorn_budget(pred, target, cost, eps)?;
    Ok(entropic_objective(&plan, cost, eps))
}

/// Gradient of the CE loss with respect to the pre-softmax logits.
pub fn ce_grad_logits(pred: &PreferenceDistribution, target: &PreferenceDistribution) -> Vec<f64> {
    let dmu: Vec<f64> = pred
        .probs()
        .iter()
        .zip(target.probs())
        .map(|(&s, &t)| if t > 0.0 { -t / s.max(CE_CLAMP) } else { 0.0 })
        .collect();
    chain_through_softmax(pred, &dmu)
}

/// Gradient of the entropic transport objective with respect to the
/// pre-softmax logits, via the Sinkhorn dual potential.
pub fn ot_grad_logits(
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    cost: &CostMatrix,
    eps: f64,
) -> Result<Vec<f64>> {
    let (_, potentials) = sinkhorn_budget(pred, target, cost, eps)?;
    let mut dmu = potentials.f;
    let mean = dmu.iter().sum::<f64>() / dmu.len() as f64;
    for g in &mut dmu {
        *g -= mean;
    }
    Ok(chain_through_softmax(pred, &dmu))
}

/// Pull a gradient in distribution space back through the softmax:
/// `dz_i = mu_i (g_i - <g, mu>)`. Constant shifts in `g` vanish here, which
/// is why mean-centred transport potentials are safe to chain.
pub fn chain_through_softmax(pred: &PreferenceDistribution, dmu: &[f64]) -> Vec<f64> {
    let inner: f64 = pred.probs().iter().zip(dmu).map(|(&p, &g)| p * g).sum();
    pred.probs()
        .iter()
        .zip(dmu)
        .map(|(&p, &g)| p * (g - inner))
        .collect()
}

/// Serialized model: head parameters plus the featurizer that feeds it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(rename = "F")]
    pub feature_dim: usize,
    pub d: usize,
    /// Row-major F x d weight matrix.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub featurizer: FeaturizerConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_head(head: &DistHead, featurizer: FeaturizerConfig, seed: u64) -> Self {
        Self {
            feature_dim: head.feature_dim,
            d: head.d,
            weights: head.weights.clone(),
            bias: head.bias.clone(),
            featurizer,
            seed,
        }
    }

    pub fn head(&self) -> Result<DistHead> {
        DistHead::from_parts(
            self.feature_dim,
            self.d,
            self.weights.clone(),
            self.bias.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
