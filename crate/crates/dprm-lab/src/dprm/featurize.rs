//! Deterministic text featurization.
//!
//! Hashed token n-gram counts stand in for an LLM backbone embedding:
//! prompt and response tokens hash into disjoint halves of the feature
//! space, unigrams and bigrams both count, and the final vector is
//! L2-normalized. The same (prompt, response, config) always yields the
//! same vector, on any platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a64;

pub const DEFAULT_FEATURE_DIM: usize = 512;

const PROMPT_SPACE: u64 = 0x70726f6d7074; // "prompt"
const RESPONSE_SPACE: u64 = 0x72657370; // "resp"
const BIGRAM_SEP: u8 = 0x1f;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_FEATURE_DIM,
            seed: 0,
        }
    }
}

/// A dense feature vector of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wrap a precomputed vector; entries must be finite.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "feature entries must be finite".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    config: FeaturizerConfig,
}

impl Featurizer {
    pub fn new(config: FeaturizerConfig) -> Result<Self> {
        if config.dim < 2 || config.dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "feature dim must be an even number >= 2, got {}",
                config.dim
            )));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> FeaturizerConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Hash (prompt, response) into a normalized count vector. The response
    /// must contain at least one non-whitespace character.
    pub fn featurize(&self, prompt: &str, response: &str) -> Result<FeatureVector> {
        if response.trim().is_empty() {
            return Err(Error::EmptyResponse(truncate(response)));
        }
        let half = self.config.dim / 2;
        let mut values = vec![0.0; self.config.dim];
        self.count_ngrams(prompt, PROMPT_SPACE, &mut values[..half]);
        self.count_ngrams(response, RESPONSE_SPACE, &mut values[half..]);

        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(FeatureVector { values })
    }

    fn count_ngrams(&self, text: &str, space: u64, slots: &mut [f64]) {
        let seed = self.config.seed ^ space;
        let tokens = tokenize(text);
        let m = slots.len() as u64;
        let mut buf = Vec::with_capacity(32);
        for window in 0..tokens.len() {
            let tok = tokens[window].as_bytes();
            slots[(fnv1a64(tok, seed) % m) as usize] += 1.0;
            if window + 1 < tokens.len() {
                buf.clear();
                buf.extend_from_slice(tok);
                buf.push(BIGRAM_SEP);
                buf.extend_from_slice(tokens[window + 1].as_bytes());
                slots[(fnv1a64(&buf, seed) % m) as usize] += 1.0;
            }
        }
    }
}

/// Lowercased alphanumeric runs.
fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn truncate(text: &str) -> String {
    text.chars().take(32).collect()
}
