//! Mini-batch training of the distributional head.
//!
//! Records are featurized once and cached. A seeded 10% split is held out;
//! after every epoch both splits are scored with the evaluation form of the
//! configured loss (exact transport, never the smooth surrogate) and the
//! checkpoint with the best held-out mean loss is returned. The learning
//! rate decays geometrically from `lr_start` to `lr_end` across epochs.

use serde::{Deserialize, Serialize};

use crate::dprm::{
    ce_grad_logits, loss_ce, loss_ot, loss_w, ot_grad_logits, DistHead, FeatureVector, Featurizer,
    LossKind, PreferenceRecord,
};
use crate::error::{Error, Result};
use crate::preference::{CategorySchema, PreferenceDistribution};
use crate::reward::expected_reward;
use crate::rng::{derive_seed, rng_from};
use crate::transport::CostMatrix;
use rand::seq::SliceRandom;

const SPLIT_STREAM: u64 = 0x5e17;
const EPOCH_STREAM: u64 = 0xe90c;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub batch_size: usize,
    pub loss_kind: LossKind,
    pub sinkhorn_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr_start: 2e-5,
            lr_end: 2e-7,
            batch_size: 12,
            loss_kind: LossKind::Ot,
            sinkhorn_eps: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(Error::InvalidParameter(format!(
                "need lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.sinkhorn_eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sinkhorn_eps must be positive, got {}",
                self.sinkhorn_eps
            )));
        }
        Ok(())
    }

    /// Geometric decay from `lr_start` to `lr_end`; epoch is 1-based.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 || self.lr_start == self.lr_end {
            return self.lr_start;
        }
        let t = (epoch - 1) as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Heldout => write!(f, "heldout"),
        }
    }
}

/// One metrics row; epoch 0 is the untrained head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub split: Split,
    pub mean_loss: f64,
    pub mean_w1: f64,
    pub mean_ce: f64,
    pub reward_mae: f64,
}

/// Per-epoch training history plus the index of the best checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub loss_kind: LossKind,
    pub rows: Vec<EpochRow>,
    pub best_epoch: usize,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,split,loss_kind,mean_loss,mean_w1,mean_ce,reward_mae\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.epoch,
                row.split,
                self.loss_kind,
                row.mean_loss,
                row.mean_w1,
                row.mean_ce,
                row.reward_mae
            ));
        }
        out
    }

    pub fn heldout_loss(&self, epoch: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epoch == epoch && r.split == Split::Heldout)
            .map(|r| r.mean_loss)
    }

    pub fn heldout_w1(&self, epoch: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epoch == epoch && r.split == Split::Heldout)
            .map(|r| r.mean_w1)
    }

    pub fn final_epoch(&self) -> usize {
        self.rows.iter().map(|r| r.epoch).max().unwrap_or(0)
    }
}

/// Aggregate prediction quality over a dataset: the per-category mean/std of
/// predicted mass, mean exact `W_1` to the targets under the reward cost,
/// mean cross-entropy, and the mean absolute expected-reward error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub mean_mass: Vec<f64>,
    pub std_mass: Vec<f64>,
    pub mean_w1: f64,
    pub mean_ce: f64,
    pub reward_mae: f64,
}

impl EvalMetrics {
    /// Render as one row of the training metrics CSV schema.
    pub fn csv_row(
        &self,
        epoch: usize,
        split: Split,
        loss_kind: LossKind,
        mean_loss: f64,
    ) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            epoch, split, loss_kind, mean_loss, self.mean_w1, self.mean_ce, self.reward_mae
        )
    }
}

/// Score a head over a dataset. Featurization failures propagate.
pub fn evaluate(
    head: &DistHead,
    records: &[PreferenceRecord],
    featurizer: &Featurizer,
    schema: &CategorySchema,
) -> Result<EvalMetrics> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features: Vec<FeatureVector> = records
        .iter()
        .map(|r| featurizer.featurize(&r.prompt, &r.response))
        .collect::<Result<_>>()?;
    evaluate_cached(head, records, &features, schema)
}

fn evaluate_cached(
    head: &DistHead,
    records: &[PreferenceRecord],
    features: &[FeatureVector],
    schema: &CategorySchema,
) -> Result<EvalMetrics> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = schema.len();
    let cost = CostMatrix::from_schema(schema);
    let mut mean_mass = vec![0.0; d];
    let mut sq_mass = vec![0.0; d];
    let mut mean_w1 = 0.0;
    let mut mean_ce = 0.0;
    let mut reward_mae = 0.0;

    for (record, fv) in records.iter().zip(features) {
        let pred = head.predict(fv)?;
        for (k, &p) in pred.probs().iter().enumerate() {
            mean_mass[k] += p;
            sq_mass[k] += p * p;
        }
        mean_w1 += loss_ot(&pred, &record.target, &cost, false, 0.0)?;
        mean_ce += loss_ce(&pred, &record.target);
        reward_mae +=
            (expected_reward(&pred, schema)? - expected_reward(&record.target, schema)?).abs();
    }

    let n = records.len() as f64;
    for k in 0..d {
        mean_mass[k] /= n;
        sq_mass[k] /= n;
    }
    let std_mass = (0..d)
        .map(|k| (sq_mass[k] - mean_mass[k] * mean_mass[k]).max(0.0).sqrt())
        .collect();
    Ok(EvalMetrics {
        n: records.len(),
        mean_mass,
        std_mass,
        mean_w1: mean_w1 / n,
        mean_ce: mean_ce / n,
        reward_mae: reward_mae / n,
    })
}

/// The evaluation form of each loss: exact solvers only.
fn eval_loss(
    kind: LossKind,
    pred: &PreferenceDistribution,
    target: &PreferenceDistribution,
    reward_cost: &CostMatrix,
) -> Result<f64> {
    match kind {
        LossKind::Ce => Ok(loss_ce(pred, target)),
        LossKind::Ot => loss_ot(pred, target, reward_cost, false, 0.0),
        LossKind::W => loss_w(pred, target, 1.0),
    }
}

fn mean_eval_loss(
    head: &DistHead,
    kind: LossKind,
    records: &[PreferenceRecord],
    features: &[FeatureVector],
    reward_cost: &CostMatrix,
) -> Result<f64> {
    let mut total = 0.0;
    for (record, fv) in records.iter().zip(features) {
        let pred = head.predict(fv)?;
        total += eval_loss(kind, &pred, &record.target, reward_cost)?;
    }
    Ok(total / records.len() as f64)
}

/// Train the head with mini-batch gradient descent on the configured loss.
/// Returns the best-held-out checkpoint and the full per-epoch curve.
pub fn train(
    head: &DistHead,
    records: &[PreferenceRecord],
    featurizer: &Featurizer,
    schema: &CategorySchema,
    config: &TrainConfig,
) -> Result<(DistHead, LossCurve)> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features: Vec<FeatureVector> = records
        .iter()
        .map(|r| featurizer.featurize(&r.prompt, &r.response))
        .collect::<Result<_>>()?;

    let reward_cost = CostMatrix::from_schema(schema);
    let grad_cost = match config.loss_kind {
        LossKind::W => CostMatrix::index_distance(schema.len()),
        _ => reward_cost.clone(),
    };

    // Seeded held-out split: 10% of records, at least one, leaving at least
    // one training record when possible.
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut split_rng = rng_from(derive_seed(config.seed, SPLIT_STREAM));
    order.shuffle(&mut split_rng);
    let heldout_count = (n / 10).max(1).min(n.saturating_sub(1)).max(1);
    let (heldout_idx, train_idx) = if n == 1 {
        (vec![0], vec![0])
    } else {
        let (h, t) = order.split_at(heldout_count);
        (h.to_vec(), t.to_vec())
    };

    let pick = |idx: &[usize]| -> (Vec<PreferenceRecord>, Vec<FeatureVector>) {
        (
            idx.iter().map(|&i| records[i].clone()).collect(),
            idx.iter().map(|&i| features[i].clone()).collect(),
        )
    };
    let (heldout_records, heldout_features) = pick(&heldout_idx);
    let (train_records, train_features) = pick(&train_idx);

    let d = schema.len();
    let feat_dim = featurizer.dim();
    let mut current = head.clone();
    let mut rows = Vec::new();

    let record_epoch = |epoch: usize, head: &DistHead, rows: &mut Vec<EpochRow>| -> Result<f64> {
        for (split, recs, feats) in [
            (Split::Train, &train_records, &train_features),
            (Split::Heldout, &heldout_records, &heldout_features),
        ] {
            let metrics = evaluate_cached(head, recs, feats, schema)?;
            let mean_loss = mean_eval_loss(head, config.loss_kind, recs, feats, &reward_cost)?;
            rows.push(EpochRow {
                epoch,
                split,
                mean_loss,
                mean_w1: metrics.mean_w1,
                mean_ce: metrics.mean_ce,
                reward_mae: metrics.reward_mae,
            });
        }
        Ok(rows
            .iter()
            .rev()
            .find(|r| r.epoch == epoch && r.split == Split::Heldout)
            .expect("just pushed")
            .mean_loss)
    };

    let epoch0_loss = record_epoch(0, &current, &mut rows)?;
    let mut best = (0usize, epoch0_loss, current.clone());

    let mut grad_w = vec![0.0; feat_dim * d];
    let mut grad_b = vec![0.0; d];

    for epoch in 1..=config.epochs {
        let lr = config.learning_rate(epoch);
        let mut batch_order = train_idx.clone();
        let mut epoch_rng = rng_from(derive_seed(
            config.seed,
            EPOCH_STREAM ^ (epoch as u64).wrapping_mul(0x9e37),
        ));
        batch_order.shuffle(&mut epoch_rng);

        for chunk in batch_order.chunks(config.batch_size) {
            for g in grad_w.iter_mut() {
                *g = 0.0;
            }
            for g in grad_b.iter_mut() {
                *g = 0.0;
            }
            for &idx in chunk {
                let fv = &features[idx];
                let target = &records[idx].target;
                let pred = current.predict(fv)?;
                let dz = match config.loss_kind {
                    LossKind::Ce => ce_grad_logits(&pred, target),
                    LossKind::Ot | LossKind::W => {
                        ot_grad_logits(&pred, target, &grad_cost, config.sinkhorn_eps)?
                    }
                };
                for (f, &x) in fv.values().iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let row = &mut grad_w[f * d..(f + 1) * d];
                    for (k, slot) in row.iter_mut().enumerate() {
                        *slot += x * dz[k];
                    }
                }
                for (k, slot) in grad_b.iter_mut().enumerate() {
                    *slot += dz[k];
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for g in grad_w.iter_mut() {
                *g *= inv;
            }
            for g in grad_b.iter_mut() {
                *g *= inv;
            }
            current.apply_gradient(&grad_w, &grad_b, lr);
        }

        let heldout_loss = record_epoch(epoch, &current, &mut rows)?;
        if heldout_loss < best.1 {
            best = (epoch, heldout_loss, current.clone());
        }
    }

    Ok((
        best.2,
        LossCurve {
            loss_kind: config.loss_kind,
            rows,
            best_epoch: best.0,
        },
    ))
}
