//! Policy optimization against a synthetic annotator population.
//!
//! The environment is a per-prompt K-armed choice: each prompt carries K
//! candidate responses whose ground-truth population preference comes from
//! the persona panel. A tabular softmax policy picks responses, scalar
//! rewards come either from the ground truth or from a trained head, and a
//! clipped-surrogate policy-gradient step maximizes reward minus a KL
//! penalty against the frozen starting policy. Single-step episodes keep
//! the reward/KL trade-off intact without sequence modelling; the
//! advantage is the batch-standardized total reward, with no critic.

use serde::{Deserialize, Serialize};

use crate::annotate::{
    compose_response, population_dist, quality_from_text, LatentQuality, Persona,
};
use crate::dprm::{DistHead, Featurizer};
use crate::error::{Error, Result};
use crate::preference::{CategorySchema, PreferenceDistribution};
use crate::reward::{expected_reward, ideal_distance, kl_divergence, total_reward};
use crate::rng::{derive_seed, rng_from};
use rand::Rng;

const ROLLOUT_STREAM: u64 = 0x7011;
const ENV_STREAM: u64 = 0xe4f;

/// Prompts, candidate responses, and the ground-truth population preference
/// for every (prompt, response) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnv {
    pub prompts: Vec<String>,
    /// `responses[x][y]` is candidate y for prompt x.
    pub responses: Vec<Vec<String>>,
    /// `truth[x][y]` is the population preference for that pair.
    pub truth: Vec<Vec<PreferenceDistribution>>,
    pub seed: u64,
}

impl SyntheticEnv {
    /// Build an environment whose response texts carry their own latent
    /// quality, scored by the given persona panel.
    pub fn generate(
        n_prompts: usize,
        responses_per_prompt: usize,
        panel: &[Persona],
        seed: u64,
        schema: &CategorySchema,
    ) -> Result<Self> {
        if n_prompts == 0 || responses_per_prompt < 2 {
            return Err(Error::InvalidParameter(
                "need at least 1 prompt and 2 responses per prompt".into(),
            ));
        }
        if panel.is_empty() {
            return Err(Error::InvalidParameter("panel must not be empty".into()));
        }
        let mut prompts = Vec::with_capacity(n_prompts);
        let mut responses = Vec::with_capacity(n_prompts);
        let mut truth = Vec::with_capacity(n_prompts);
        let band = 2.0 / responses_per_prompt as f64;
        for x in 0..n_prompts {
            let mut rng = rng_from(derive_seed(seed, ENV_STREAM ^ (x as u64)));
            prompts.push(crate::annotate::compose_prompt(x, &mut rng));
            // Stratified helpfulness bands (shuffled per prompt) keep the
            // candidate set genuinely distinguishable instead of letting
            // i.i.d. draws collapse into near-ties.
            let mut bands: Vec<usize> = (0..responses_per_prompt).collect();
            for k in (1..bands.len()).rev() {
                let j = (rng.random::<u32>() as usize) % (k + 1);
                bands.swap(k, j);
            }
            let mut row_text = Vec::with_capacity(responses_per_prompt);
            let mut row_truth = Vec::with_capacity(responses_per_prompt);
            for y in 0..responses_per_prompt {
                let lo = -1.0 + bands[y] as f64 * band;
                let quality = LatentQuality {
                    helpfulness: rng.random_range(lo..lo + band),
                    harm: rng.random_range(0.0..0.8),
                };
                let text = compose_response(&quality, &mut rng);
                // Score the text as annotators would read it, so the truth
                // matches what any text-only judge can recover.
                let seen = quality_from_text(&text);
                row_truth.push(population_dist(panel, &seen, schema));
                row_text.push(text);
            }
            responses.push(row_text);
            truth.push(row_truth);
        }
        Ok(Self {
            prompts,
            responses,
            truth,
            seed,
        })
    }

    pub fn n_prompts(&self) -> usize {
        self.prompts.len()
    }

    pub fn responses_per_prompt(&self) -> usize {
        self.responses.first().map_or(0, Vec::len)
    }
}

/// Tabular softmax policy: one logit vector per prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub logits: Vec<Vec<f64>>,
    pub temperature: f64,
}

impl Policy {
    pub fn uniform(n_prompts: usize, responses_per_prompt: usize) -> Self {
        Self {
            logits: vec![vec![0.0; responses_per_prompt]; n_prompts],
            temperature: 1.0,
        }
    }

    /// Near-deterministic policy picking the given response per prompt.
    pub fn greedy(choices: &[usize], responses_per_prompt: usize) -> Self {
        let logits = choices
            .iter()
            .map(|&y| {
                let mut row = vec![0.0; responses_per_prompt];
                row[y] = 50.0;
                row
            })
            .collect();
        Self {
            logits,
            temperature: 1.0,
        }
    }

    pub fn probs(&self, prompt: usize) -> Vec<f64> {
        let row = &self.logits[prompt];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row
            .iter()
            .map(|&z| ((z - m) / self.temperature).exp())
            .collect();
        let total: f64 = exps.iter().sum();
        exps.iter().map(|&e| e / total).collect()
    }

    pub fn log_prob(&self, prompt: usize, response: usize) -> f64 {
        self.probs(prompt)[response].max(1e-300).ln()
    }

    fn sample(&self, prompt: usize, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        let probs = self.probs(prompt);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        probs.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "policy temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Where the scalar reward for a sampled response comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    DprmHead,
    TruthOracle,
}

impl std::str::FromStr for RewardSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dprm_head" => Ok(RewardSource::DprmHead),
            "truth_oracle" => Ok(RewardSource::TruthOracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown reward source {other:?} (expected dprm_head or truth_oracle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub steps: usize,
    pub batch: usize,
    pub clip: f64,
    pub beta: f64,
    pub lr: f64,
    pub seed: u64,
    pub reward_source: RewardSource,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            steps: 600,
            batch: 64,
            clip: 0.2,
            beta: 0.1,
            lr: 0.05,
            seed: 0,
            reward_source: RewardSource::TruthOracle,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidParameter("batch must be >= 1".into()));
        }
        if !(self.clip > 0.0 && self.clip <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "clip must lie in (0,1], got {}",
                self.clip
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// One rollout sample with its behavior-policy log probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub prompt: usize,
    pub response: usize,
    pub log_prob: f64,
}

/// Draw `n` i.i.d. (prompt, response) samples from the policy.
pub fn rollout(policy: &Policy, env: &SyntheticEnv, n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = rng_from(derive_seed(seed, ROLLOUT_STREAM));
    (0..n)
        .map(|_| {
            let prompt = (rng.random::<u32>() as usize) % env.n_prompts();
            let response = policy.sample(prompt, &mut rng);
            Sample {
                prompt,
                response,
                log_prob: policy.log_prob(prompt, response),
            }
        })
        .collect()
}

/// Per-(prompt, response) scalar rewards, precomputed once per run.
pub type RewardTable = Vec<Vec<f64>>;

/// Expected ground-truth reward per cell.
pub fn truth_reward_table(env: &SyntheticEnv, schema: &CategorySchema) -> Result<RewardTable> {
    env.truth
        .iter()
        .map(|row| {
            row.iter()
                .map(|dist| expected_reward(dist, schema))
                .collect()
        })
        .collect()
}

/// Expected reward per cell as predicted by a trained head.
pub fn head_reward_table(
    env: &SyntheticEnv,
    head: &DistHead,
    featurizer: &Featurizer,
    schema: &CategorySchema,
) -> Result<RewardTable> {
    env.prompts
        .iter()
        .zip(&env.responses)
        .map(|(prompt, responses)| {
            responses
                .iter()
                .map(|response| {
                    let features = featurizer.featurize(prompt, response)?;
                    expected_reward(&head.predict(&features)?, schema)
                })
                .collect()
        })
        .collect()
}

/// Diagnostics for one PPO step, logged before the update is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub mean_total_reward: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
}

/// Mean KL(policy || reference) over all prompts.
pub fn mean_policy_kl(policy: &Policy, reference: &Policy) -> Result<f64> {
    let mut total = 0.0;
    for x in 0..policy.logits.len() {
        total += kl_divergence(&policy.probs(x), &reference.probs(x))?;
    }
    Ok(total / policy.logits.len() as f64)
}

/// One clipped-surrogate ascent step on a rollout batch.
///
/// The advantage is the batch-standardized total reward
/// `r - beta * (log pi(y|x) - log pi_ref(y|x))`; the KL term uses the
/// per-sample log-ratio, the standard sample estimate of the divergence
/// penalty. Samples fall out of the gradient when the ratio leaves the
/// clip band on the wrong side of their advantage.
pub fn ppo_step(
    policy: &Policy,
    reference: &Policy,
    rewards: &RewardTable,
    batch: &[Sample],
    config: &PpoConfig,
) -> Result<(Policy, StepStats)> {
    config.validate()?;
    policy.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }

    let mut totals = Vec::with_capacity(batch.len());
    let mut audit_total = 0.0;
    for sample in batch {
        let r = rewards[sample.prompt][sample.response];
        let log_ratio = policy.log_prob(sample.prompt, sample.response)
            - reference.log_prob(sample.prompt, sample.response);
        totals.push(r - config.beta * log_ratio);
        // Audit curve uses the exact per-prompt divergence, which is
        // non-negative by construction.
        let kl = kl_divergence(
            &policy.probs(sample.prompt),
            &reference.probs(sample.prompt),
        )?;
        audit_total += total_reward(r, kl, config.beta)?.total;
    }
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let var = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / totals.len() as f64;
    let std = var.sqrt();
    let advantages: Vec<f64> = if std < 1e-12 {
        vec![0.0; totals.len()]
    } else {
        totals.iter().map(|t| (t - mean) / std).collect()
    };

    let mut grad: Vec<Vec<f64>> = policy
        .logits
        .iter()
        .map(|row| vec![0.0; row.len()])
        .collect();
    let mut clipped = 0usize;
    let inv_n = 1.0 / batch.len() as f64;
    for (sample, &adv) in batch.iter().zip(&advantages) {
        let ratio = (policy.log_prob(sample.prompt, sample.response) - sample.log_prob).exp();
        if ratio > 1.0 + config.clip || ratio < 1.0 - config.clip {
            clipped += 1;
        }
        // d/dtheta min(rho A, clip(rho) A): zero once the ratio is clipped
        // on the far side of the advantage, rho A * dlog pi otherwise.
        let active = if adv >= 0.0 {
            ratio <= 1.0 + config.clip
        } else {
            ratio >= 1.0 - config.clip
        };
        if !active {
            continue;
        }
        let probs = policy.probs(sample.prompt);
        let coef = adv * ratio * inv_n / policy.temperature;
        for (y, slot) in grad[sample.prompt].iter_mut().enumerate() {
            let indicator = if y == sample.response { 1.0 } else { 0.0 };
            *slot += coef * (indicator - probs[y]);
        }
    }

    let mut next = policy.clone();
    for (row, g) in next.logits.iter_mut().zip(&grad) {
        for (z, &dz) in row.iter_mut().zip(g) {
            *z += config.lr * dz;
        }
    }

    let stats = StepStats {
        mean_total_reward: audit_total / batch.len() as f64,
        mean_kl: mean_policy_kl(policy, reference)?,
        clip_fraction: clipped as f64 / batch.len() as f64,
    };
    Ok((next, stats))
}

/// Per-step training curves in CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub rows: Vec<(usize, StepStats)>,
}

impl Curves {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_total_reward,mean_kl,clip_fraction\n");
        for (step, stats) in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                step, stats.mean_total_reward, stats.mean_kl, stats.clip_fraction
            ));
        }
        out
    }

    pub fn mean_total_reward_over(&self, range: std::ops::Range<usize>) -> f64 {
        let slice: Vec<f64> = self
            .rows
            .iter()
            .filter(|(step, _)| range.contains(step))
            .map(|(_, s)| s.mean_total_reward)
            .collect();
        slice.iter().sum::<f64>() / slice.len().max(1) as f64
    }

    pub fn final_kl(&self) -> Option<f64> {
        self.rows.last().map(|(_, s)| s.mean_kl)
    }
}

/// Run `steps` iterations of rollout + PPO step from `policy`, against a
/// frozen copy of it as the reference. Returns the final policy and the
/// per-step curves.
pub fn align(
    policy: &Policy,
    env: &SyntheticEnv,
    rewards: &RewardTable,
    config: &PpoConfig,
) -> Result<(Policy, Curves)> {
    config.validate()?;
    policy.validate()?;
    if rewards.len() != env.n_prompts() {
        return Err(Error::DimensionMismatch {
            expected: env.n_prompts(),
            got: rewards.len(),
        });
    }
    let reference = policy.clone();
    let mut current = policy.clone();
    let mut curves = Curves {
        rows: Vec::with_capacity(config.steps),
    };
    for step in 0..config.steps {
        let batch = rollout(
            &current,
            env,
            config.batch,
            derive_seed(config.seed, (step as u64) << 1),
        );
        let (next, stats) = ppo_step(&current, &reference, rewards, &batch, config)?;
        curves.rows.push((step, stats));
        current = next;
    }
    Ok((current, curves))
}

/// Fraction of prompts where policy A's sampled response beats policy B's
/// under ground-truth expected reward, counting ties as half.
pub fn win_rate(
    policy_a: &Policy,
    policy_b: &Policy,
    env: &SyntheticEnv,
    n: usize,
    seed: u64,
    schema: &CategorySchema,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("win_rate needs n >= 1".into()));
    }
    let rewards = truth_reward_table(env, schema)?;
    let mut rng = rng_from(derive_seed(seed, 0x31f1));
    let mut score = 0.0;
    for _ in 0..n {
        let prompt = (rng.random::<u32>() as usize) % env.n_prompts();
        let ya = policy_a.sample(prompt, &mut rng);
        let yb = policy_b.sample(prompt, &mut rng);
        let ra = rewards[prompt][ya];
        let rb = rewards[prompt][yb];
        if ra > rb {
            score += 1.0;
        } else if ra == rb {
            score += 0.5;
        }
    }
    Ok(score / n as f64)
}

/// Policy-weighted mean ground-truth expected reward over the environment.
pub fn policy_mean_reward(
    policy: &Policy,
    env: &SyntheticEnv,
    schema: &CategorySchema,
) -> Result<f64> {
    let rewards = truth_reward_table(env, schema)?;
    let mut total = 0.0;
    for x in 0..env.n_prompts() {
        let probs = policy.probs(x);
        for (y, &p) in probs.iter().enumerate() {
            total += p * rewards[x][y];
        }
    }
    Ok(total / env.n_prompts() as f64)
}

/// Policy-weighted mean distance of sampled responses' ground truth from
/// the ideal one-hot preference.
pub fn policy_mean_ideal_distance(
    policy: &Policy,
    env: &SyntheticEnv,
    schema: &CategorySchema,
) -> Result<f64> {
    let mut total = 0.0;
    for x in 0..env.n_prompts() {
        let probs = policy.probs(x);
        for (y, &p) in probs.iter().enumerate() {
            total += p * ideal_distance(&env.truth[x][y], schema, 1.0)?;
        }
    }
    Ok(total / env.n_prompts() as f64)
}
