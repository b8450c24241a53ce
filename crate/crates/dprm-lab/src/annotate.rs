//! Synthetic annotator population and dataset construction.
//!
//! Dataset rows are built in three steps per prompt/chosen/rejected triple:
//! a prior panel of personas labels both responses, a second round of
//! persona labels refines the prior through the Bayesian update, and any
//! posterior that ends up fully certain gets targeted smoothing. Personas
//! are parameterized judges: a helpfulness threshold, a harm sensitivity,
//! and a sampling temperature drive a softmax over category affinities.
//!
//! The hidden quality of a response is carried *inside its text*: responses
//! are composed from small word banks whose mix encodes (helpfulness, harm),
//! and the synthetic annotator recovers the quality by counting bank words.
//! That keeps the annotator interface honest — it reads only the text, like
//! a remote judge would — while giving the pipeline a controllable ground
//! truth to score against.

use serde::{Deserialize, Serialize};

use crate::dprm::{PreferenceRecord, SourceTag};
use crate::error::{Error, Result};
use crate::preference::{
    aggregate, posterior_update, smooth_targeted, CategorySchema, GroupPreference, HarmlessnessTag,
    HelpfulnessTag, PreferenceDistribution, SmoothingMode, UserPreference, DEFAULT_SMOOTHING_ALPHA,
};
use crate::reward::expected_reward;
use crate::rng::{derive_seed, fnv1a64, rng_from};
use crate::transport::CostMatrix;
use rand::Rng;

pub mod remote;
pub use remote::RemoteJson;

const PAIR_STREAM: u64 = 0x9a17;
const PRIOR_STREAM: u64 = 0x0b57;
const POSTERIOR_STREAM: u64 = 0x90a2;
const RESAMPLE_BUDGET: usize = 10;

/// Hidden per-(prompt,response) quality driving synthetic labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentQuality {
    /// In [-1, 1]: how well the response serves the prompt.
    pub helpfulness: f64,
    /// In [0, 1]: how much damage the response can do.
    pub harm: f64,
}

impl LatentQuality {
    pub fn new(helpfulness: f64, harm: f64) -> Result<Self> {
        if !((-1.0..=1.0).contains(&helpfulness) && (0.0..=1.0).contains(&harm)) {
            return Err(Error::InvalidParameter(format!(
                "latent quality out of range: helpfulness {helpfulness}, harm {harm}"
            )));
        }
        Ok(Self { helpfulness, harm })
    }
}

/// A parameterized synthetic judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    /// How good a response must be before this judge calls it helpful.
    pub helpfulness_threshold: f64,
    /// Multiplier on perceived harm; above 0.5 the judge flags harm = 1.
    pub harm_sensitivity: f64,
    /// Softmax temperature; larger means noisier labels.
    pub noise_temp: f64,
    /// Stream tag mixed into per-annotator seeds.
    pub seed_offset: u64,
}

impl Persona {
    pub fn new(
        name: &str,
        helpfulness_threshold: f64,
        harm_sensitivity: f64,
        noise_temp: f64,
        seed_offset: u64,
    ) -> Result<Self> {
        if !(noise_temp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_temp must be positive, got {noise_temp}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            helpfulness_threshold,
            harm_sensitivity,
            noise_temp,
            seed_offset,
        })
    }
}

/// The seven standard personas.
pub fn default_panel() -> Vec<Persona> {
    [
        ("StrictScientist", 0.40, 1.20, 0.30, 1),
        ("KindergartenTeacher", -0.20, 1.40, 0.35, 2),
        ("Politician", 0.10, 0.70, 0.50, 3),
        ("Teenager", -0.30, 0.55, 0.70, 4),
        ("CEO", 0.30, 1.00, 0.30, 5),
        ("Artist", 0.00, 0.80, 0.60, 6),
        ("GeneralAssistant", 0.00, 1.00, 0.40, 7),
    ]
    .iter()
    .map(|&(name, th, hs, nt, so)| Persona::new(name, th, hs, nt, so).expect("static panel"))
    .collect()
}

/// Margin scale on affinities; large enough that unanimous panels (and so
/// degenerate posteriors needing smoothing) actually occur at the default
/// noise temperatures when a response saturates both quality axes.
const AFFINITY_SCALE: f64 = 2.0;

/// Per-category affinity: helpfulness and harm judgements add, so the
/// induced softmax factorizes over the two tag dimensions.
fn category_affinities(
    persona: &Persona,
    quality: &LatentQuality,
    schema: &CategorySchema,
) -> Vec<f64> {
    let h_dev = quality.helpfulness - persona.helpfulness_threshold;
    let z = persona.harm_sensitivity * quality.harm;
    schema
        .categories()
        .iter()
        .map(|cat| {
            let help = match cat.helpfulness_tag {
                HelpfulnessTag::Helpful => h_dev,
                HelpfulnessTag::NeutralHelpful => 0.5 - h_dev.abs(),
                HelpfulnessTag::NotHelpful => -h_dev,
            };
            let harm = match cat.harmlessness_tag {
                HarmlessnessTag::Harmless => 0.5 - z,
                HarmlessnessTag::Harmful => z - 0.5,
            };
            AFFINITY_SCALE * (help + harm)
        })
        .collect()
}

/// The probability the persona assigns each category: softmax of the
/// affinities at the persona's noise temperature.
pub fn category_probs(
    persona: &Persona,
    quality: &LatentQuality,
    schema: &CategorySchema,
) -> PreferenceDistribution {
    let aff = category_affinities(persona, quality, schema);
    let m = aff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = aff
        .iter()
        .map(|&a| ((a - m) / persona.noise_temp).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    PreferenceDistribution::from_normalized(exps.iter().map(|&e| e / total).collect())
}

/// Draw one label. Deterministic for a fixed seed; the marginal over many
/// seeds is exactly [`category_probs`].
pub fn sample_label(
    persona: &Persona,
    quality: &LatentQuality,
    seed: u64,
    schema: &CategorySchema,
) -> UserPreference {
    let probs = category_probs(persona, quality, schema);
    let u: f64 = rng_from(seed).random();
    let mut acc = 0.0;
    for (k, &p) in probs.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return UserPreference::new(schema, k + 1).expect("index in range");
        }
    }
    UserPreference::new(schema, schema.len()).expect("last category")
}

/// The analytic population preference of a panel for a given quality: the
/// equal-weight mixture of every panelist's label distribution.
pub fn population_dist(
    panel: &[Persona],
    quality: &LatentQuality,
    schema: &CategorySchema,
) -> PreferenceDistribution {
    let d = schema.len();
    let mut acc = vec![0.0; d];
    for persona in panel {
        for (slot, &p) in acc
            .iter_mut()
            .zip(category_probs(persona, quality, schema).probs())
        {
            *slot += p;
        }
    }
    let n = panel.len() as f64;
    PreferenceDistribution::from_normalized(acc.into_iter().map(|x| x / n).collect())
}

// --- text codec -------------------------------------------------------------

const HELPFUL_WORDS: [&str; 8] = [
    "precise",
    "thorough",
    "accurate",
    "clear",
    "detailed",
    "relevant",
    "practical",
    "sound",
];
const UNHELPFUL_WORDS: [&str; 8] = [
    "vague",
    "evasive",
    "rambling",
    "confusing",
    "incorrect",
    "irrelevant",
    "shallow",
    "muddled",
];
const HARMFUL_WORDS: [&str; 6] = [
    "reckless",
    "dangerous",
    "toxic",
    "abusive",
    "misleading",
    "unsafe",
];
const NEUTRAL_WORDS: [&str; 6] = ["measured", "steady", "plain", "ordinary", "mild", "calm"];
const TOPICS: [&str; 10] = [
    "magnets",
    "gravity",
    "taxes",
    "recipes",
    "travel",
    "security",
    "history",
    "music",
    "gardening",
    "chess",
];

const HELP_SLOTS: usize = 8;
const HARM_SLOTS: usize = 4;

pub fn compose_prompt(pair_idx: usize, rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let topic = TOPICS[(rng.random::<u32>() as usize) % TOPICS.len()];
    format!("q{pair_idx:05} tell me about {topic}")
}

/// Compose a response whose word-bank mix encodes the latent quality,
/// quantized to 1/8 steps of helpfulness and 1/4 steps of harm.
pub fn compose_response(quality: &LatentQuality, rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let n_help = (((quality.helpfulness + 1.0) / 2.0) * HELP_SLOTS as f64).round() as usize;
    let n_help = n_help.min(HELP_SLOTS);
    let n_harm = ((quality.harm * HARM_SLOTS as f64).round() as usize).min(HARM_SLOTS);

    let mut words: Vec<&str> = Vec::with_capacity(HELP_SLOTS + HARM_SLOTS);
    for _ in 0..n_help {
        words.push(HELPFUL_WORDS[(rng.random::<u32>() as usize) % HELPFUL_WORDS.len()]);
    }
    for _ in n_help..HELP_SLOTS {
        words.push(UNHELPFUL_WORDS[(rng.random::<u32>() as usize) % UNHELPFUL_WORDS.len()]);
    }
    for _ in 0..n_harm {
        words.push(HARMFUL_WORDS[(rng.random::<u32>() as usize) % HARMFUL_WORDS.len()]);
    }
    for _ in n_harm..HARM_SLOTS {
        words.push(NEUTRAL_WORDS[(rng.random::<u32>() as usize) % NEUTRAL_WORDS.len()]);
    }
    // Deterministic order shuffle so word position carries no signal.
    for k in (1..words.len()).rev() {
        let j = (rng.random::<u32>() as usize) % (k + 1);
        words.swap(k, j);
    }
    words.join(" ")
}

/// Recover the quantized latent quality from a response's word-bank counts.
pub fn quality_from_text(response: &str) -> LatentQuality {
    let mut n_help = 0usize;
    let mut n_unhelp = 0usize;
    let mut n_harm = 0usize;
    let mut n_neutral = 0usize;
    for token in response.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        let lower = token.to_lowercase();
        if HELPFUL_WORDS.contains(&lower.as_str()) {
            n_help += 1;
        } else if UNHELPFUL_WORDS.contains(&lower.as_str()) {
            n_unhelp += 1;
        } else if HARMFUL_WORDS.contains(&lower.as_str()) {
            n_harm += 1;
        } else if NEUTRAL_WORDS.contains(&lower.as_str()) {
            n_neutral += 1;
        }
    }
    let helpfulness = if n_help + n_unhelp == 0 {
        0.0
    } else {
        2.0 * n_help as f64 / (n_help + n_unhelp) as f64 - 1.0
    };
    let harm = if n_harm + n_neutral == 0 {
        0.0
    } else {
        n_harm as f64 / (n_harm + n_neutral) as f64
    };
    LatentQuality { helpfulness, harm }
}

// --- annotator clients -------------------------------------------------------

/// A source of category labels for prompt-response pairs.
///
/// `reseed` fixes the randomness of the *next* label call; generators call
/// it with a derived per-(pair, response, annotator) seed so runs are
/// reproducible and order-independent. Stateless clients ignore it.
pub trait AnnotatorClient {
    fn reseed(&mut self, _seed: u64) {}

    /// Label the pair as a 1-based category id.
    fn label(&mut self, prompt: &str, response: &str, persona: &Persona) -> Result<usize>;
}

/// The built-in synthetic judge: reads the latent quality out of the
/// response text and samples from the persona's label distribution.
#[derive(Debug, Clone)]
pub struct SyntheticSampler {
    schema: CategorySchema,
    seed: u64,
}

impl SyntheticSampler {
    pub fn new(schema: CategorySchema, seed: u64) -> Self {
        Self { schema, seed }
    }
}

impl AnnotatorClient for SyntheticSampler {
    fn reseed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn label(&mut self, _prompt: &str, response: &str, persona: &Persona) -> Result<usize> {
        let quality = quality_from_text(response);
        // Mix text and persona into the stream so two calls that share a
        // reseed still decorrelate across responses and judges.
        let seed = self.seed
            ^ fnv1a64(response.as_bytes(), 0x7157)
            ^ persona.seed_offset.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Ok(sample_label(persona, &quality, seed, &self.schema).category_id())
    }
}

// --- dataset construction ----------------------------------------------------

/// Shape of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_pairs: usize,
    /// Fraction of pairs drawn from the helpfulness regime (the rest come
    /// from the harmlessness regime).
    pub helpfulness_fraction: f64,
    pub panel: Vec<Persona>,
    pub prior_panel_size: usize,
    pub posterior_labels_per_record: usize,
    pub alpha_smooth: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_pairs: 1000,
            helpfulness_fraction: 2.0 / 3.0,
            panel: default_panel(),
            prior_panel_size: 7,
            posterior_labels_per_record: 7,
            alpha_smooth: DEFAULT_SMOOTHING_ALPHA,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::InvalidParameter("n_pairs must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.helpfulness_fraction) {
            return Err(Error::InvalidParameter(format!(
                "helpfulness_fraction must lie in [0,1], got {}",
                self.helpfulness_fraction
            )));
        }
        if self.panel.is_empty() {
            return Err(Error::InvalidParameter("panel must not be empty".into()));
        }
        if self.prior_panel_size == 0 || self.posterior_labels_per_record == 0 {
            return Err(Error::InvalidParameter("panel sizes must be >= 1".into()));
        }
        if !(self.alpha_smooth > 0.0 && self.alpha_smooth < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_smooth must lie in (0,1), got {}",
                self.alpha_smooth
            )));
        }
        Ok(())
    }
}

/// Sidecar manifest describing one generation run. `generated_at` is the
/// only timestamp any output file carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub n_pairs: usize,
    pub records: usize,
    pub helpfulness_pairs: usize,
    pub harmlessness_pairs: usize,
    pub smoothed_records: usize,
    pub inconsistent_pairs: usize,
    pub resampled_pairs: usize,
    pub prior_panel_size: usize,
    pub posterior_labels_per_record: usize,
    pub alpha_smooth: f64,
    pub helpfulness_fraction: f64,
    pub panel: Vec<String>,
    pub generated_at: u64,
}

/// Result of the prior step for one pair.
#[derive(Debug, Clone)]
pub struct PriorPair {
    pub chosen: GroupPreference,
    pub rejected: GroupPreference,
    /// False when the reward-ordering constraint failed every resample.
    pub consistent: bool,
    /// Resamples consumed (0 when the first panel already satisfied it).
    pub resamples: usize,
}

/// Step one: a prior panel labels both responses, enforcing that the chosen
/// response out-scores the rejected one by resampling up to ten times, then
/// flagging the pair rather than rejecting it.
pub fn build_prior(
    prompt: &str,
    chosen_response: &str,
    rejected_response: &str,
    client: &mut dyn AnnotatorClient,
    spec: &DatasetSpec,
    pair_seed: u64,
    schema: &CategorySchema,
) -> Result<PriorPair> {
    let mut last: Option<(GroupPreference, GroupPreference)> = None;
    for attempt in 0..=RESAMPLE_BUDGET {
        let mut chosen_labels = Vec::with_capacity(spec.prior_panel_size);
        let mut rejected_labels = Vec::with_capacity(spec.prior_panel_size);
        for k in 0..spec.prior_panel_size {
            let persona = &spec.panel[k % spec.panel.len()];
            for (side, response, sink) in [
                (0u64, chosen_response, &mut chosen_labels),
                (1u64, rejected_response, &mut rejected_labels),
            ] {
                client.reseed(derive_seed(
                    pair_seed,
                    PRIOR_STREAM ^ ((attempt as u64) << 24) ^ ((k as u64) << 2) ^ side,
                ));
                let id = client.label(prompt, response, persona)?;
                if id == 0 || id > schema.len() {
                    return Err(Error::ClientFailure {
                        message: format!(
                            "client returned category {id} outside 1..={} for persona {}",
                            schema.len(),
                            persona.name
                        ),
                        completed_pairs: 0,
                    });
                }
                sink.push(UserPreference::new(schema, id)?);
            }
        }
        let chosen_group = aggregate(&chosen_labels)?;
        let rejected_group = aggregate(&rejected_labels)?;
        let ok = expected_reward(&chosen_group.dist(), schema)?
            > expected_reward(&rejected_group.dist(), schema)?;
        if ok {
            return Ok(PriorPair {
                chosen: chosen_group,
                rejected: rejected_group,
                consistent: true,
                resamples: attempt,
            });
        }
        last = Some((chosen_group, rejected_group));
    }
    let (chosen, rejected) = last.expect("at least one attempt ran");
    Ok(PriorPair {
        chosen,
        rejected,
        consistent: false,
        resamples: RESAMPLE_BUDGET,
    })
}

/// Step two: fold new labels into the prior one at a time.
pub fn apply_posterior(
    prior: &GroupPreference,
    new_labels: &[UserPreference],
) -> Result<GroupPreference> {
    let mut group = prior.clone();
    for label in new_labels {
        group = posterior_update(&group, label)?;
    }
    Ok(group)
}

fn draw_pair_latents(
    source: SourceTag,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (LatentQuality, LatentQuality) {
    match source {
        SourceTag::Harmlessness => {
            let chosen_harm: f64 = rng.random_range(0.0..0.25);
            let rejected_harm = (chosen_harm + rng.random_range(0.45..0.85)).min(1.0);
            let chosen_help = rng.random_range(-0.1..0.9);
            let rejected_help = rng.random_range(-0.4..0.6);
            (
                LatentQuality {
                    helpfulness: chosen_help,
                    harm: chosen_harm,
                },
                LatentQuality {
                    helpfulness: rejected_help,
                    harm: rejected_harm,
                },
            )
        }
        _ => {
            let chosen_help: f64 = rng.random_range(0.35..1.0);
            let rejected_help = (chosen_help - rng.random_range(0.6..1.3)).max(-1.0);
            let chosen_harm = rng.random_range(0.0..0.2);
            let rejected_harm = rng.random_range(0.0..0.25);
            (
                LatentQuality {
                    helpfulness: chosen_help,
                    harm: chosen_harm,
                },
                LatentQuality {
                    helpfulness: rejected_help,
                    harm: rejected_harm,
                },
            )
        }
    }
}

/// Run the full three-step pipeline: prior, posterior, smoothing. Emits two
/// records per pair (chosen and rejected) in pair order. Deterministic for a
/// fixed seed; client failures abort with the number of completed pairs.
pub fn generate_dataset(
    spec: &DatasetSpec,
    client: &mut dyn AnnotatorClient,
    seed: u64,
    schema: &CategorySchema,
) -> Result<(Vec<PreferenceRecord>, DatasetManifest)> {
    spec.validate()?;
    let cost = CostMatrix::from_schema(schema);
    let mut records = Vec::with_capacity(spec.n_pairs * 2);
    let mut smoothed_records = 0usize;
    let mut inconsistent_pairs = 0usize;
    let mut resampled_pairs = 0usize;
    let mut helpfulness_pairs = 0usize;

    for pair_idx in 0..spec.n_pairs {
        let pair_seed = derive_seed(seed, PAIR_STREAM ^ (pair_idx as u64));
        let mut rng = rng_from(pair_seed);
        let source = if rng.random::<f64>() < spec.helpfulness_fraction {
            SourceTag::Helpfulness
        } else {
            SourceTag::Harmlessness
        };
        if source == SourceTag::Helpfulness {
            helpfulness_pairs += 1;
        }
        let (chosen_quality, rejected_quality) = draw_pair_latents(source, &mut rng);
        let prompt = compose_prompt(pair_idx, &mut rng);
        let chosen_response = compose_response(&chosen_quality, &mut rng);
        let rejected_response = compose_response(&rejected_quality, &mut rng);

        let attach_progress = |e: Error| match e {
            Error::ClientFailure { message, .. } => Error::ClientFailure {
                message,
                completed_pairs: pair_idx,
            },
            other => other,
        };

        let prior = build_prior(
            &prompt,
            &chosen_response,
            &rejected_response,
            client,
            spec,
            pair_seed,
            schema,
        )
        .map_err(attach_progress)?;

        // The posterior round can flip the ordering the prior established,
        // so the constraint is re-checked on the final targets with the
        // same resample-then-flag policy.
        let mut kept: Option<[(PreferenceDistribution, u64, bool); 2]> = None;
        let mut consistent = prior.consistent;
        let mut posterior_resamples = 0usize;
        for attempt in 0..=RESAMPLE_BUDGET {
            let mut sides = Vec::with_capacity(2);
            for (side, response, group) in [
                (0u64, &chosen_response, &prior.chosen),
                (1u64, &rejected_response, &prior.rejected),
            ] {
                let mut labels = Vec::with_capacity(spec.posterior_labels_per_record);
                for k in 0..spec.posterior_labels_per_record {
                    let persona = &spec.panel[k % spec.panel.len()];
                    client.reseed(derive_seed(
                        pair_seed,
                        POSTERIOR_STREAM ^ ((attempt as u64) << 24) ^ ((k as u64) << 2) ^ side,
                    ));
                    let id = client
                        .label(&prompt, response, persona)
                        .map_err(attach_progress)?;
                    if id == 0 || id > schema.len() {
                        return Err(Error::ClientFailure {
                            message: format!(
                                "client returned category {id} outside 1..={}",
                                schema.len()
                            ),
                            completed_pairs: pair_idx,
                        });
                    }
                    labels.push(UserPreference::new(schema, id)?);
                }
                let posterior = apply_posterior(group, &labels)?;
                let dist = posterior.dist();
                let degenerate = dist.one_hot_index().is_some();
                let target = if degenerate {
                    smooth_targeted(&dist, spec.alpha_smooth, &cost, SmoothingMode::Permissive)?
                } else {
                    dist
                };
                sides.push((target, posterior.group_size(), degenerate));
            }
            let pair: [(PreferenceDistribution, u64, bool); 2] = [sides.remove(0), sides.remove(0)];
            let ordered = prior.consistent
                && expected_reward(&pair[0].0, schema)? > expected_reward(&pair[1].0, schema)?;
            kept = Some(pair);
            if ordered {
                posterior_resamples = attempt;
                break;
            }
            if !prior.consistent {
                // Already flagged at the prior stage; no point resampling.
                break;
            }
            posterior_resamples = attempt;
            if attempt == RESAMPLE_BUDGET {
                consistent = false;
            }
        }
        let pair = kept.expect("at least one posterior attempt ran");

        if !consistent {
            inconsistent_pairs += 1;
        }
        if prior.resamples > 0 || posterior_resamples > 0 {
            resampled_pairs += 1;
        }
        for (slot, (target, group_size, degenerate)) in pair.into_iter().enumerate() {
            if degenerate {
                smoothed_records += 1;
            }
            records.push(PreferenceRecord {
                id: format!(
                    "pair{pair_idx:05}-{}",
                    if slot == 0 { "chosen" } else { "rejected" }
                ),
                prompt: prompt.clone(),
                response: if slot == 0 {
                    chosen_response.clone()
                } else {
                    rejected_response.clone()
                },
                target,
                group_size,
                source_tag: source,
                smoothed: degenerate,
                inconsistent: !consistent,
            });
        }
    }

    let manifest = DatasetManifest {
        seed,
        n_pairs: spec.n_pairs,
        records: records.len(),
        helpfulness_pairs,
        harmlessness_pairs: spec.n_pairs - helpfulness_pairs,
        smoothed_records,
        inconsistent_pairs,
        resampled_pairs,
        prior_panel_size: spec.prior_panel_size,
        posterior_labels_per_record: spec.posterior_labels_per_record,
        alpha_smooth: spec.alpha_smooth,
        helpfulness_fraction: spec.helpfulness_fraction,
        panel: spec.panel.iter().map(|p| p.name.clone()).collect(),
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok((records, manifest))
}
