//! Categorical crowd-preference modelling.
//!
//! A population's judgement of a prompt-response pair is a distribution over
//! a small set of hybrid helpfulness/harmlessness categories, each carrying a
//! scalar reward. Single users contribute one-hot labels; groups aggregate
//! them by counting and absorb new labels through an exact Bayesian update.
//! Two smoothing operators temper fully-certain distributions: targeted
//! smoothing moves a small mass to the cheapest neighbouring category, while
//! indiscriminate label smoothing spreads it everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transport::CostMatrix;

/// Tolerance for treating a distribution as exactly one-hot.
pub const ONE_HOT_TOL: f64 = 1e-12;

/// Simplex tolerance used by validity checks throughout the crate.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default smoothing strength: with six categories it moves exactly 0.001
/// of mass, turning `[1,0,0,0,0,0]` into `[0.999,0.001,0,0,0,0]`.
pub const DEFAULT_SMOOTHING_ALPHA: f64 = 0.0012;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HelpfulnessTag {
    Helpful,
    NeutralHelpful,
    NotHelpful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarmlessnessTag {
    Harmless,
    Harmful,
}

/// One preference category: a (helpfulness, harmlessness) pair with a reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    /// 1-based index; ids run 1..=d with no gaps.
    pub id: usize,
    #[serde(rename = "helpfulness")]
    pub helpfulness_tag: HelpfulnessTag,
    #[serde(rename = "harmlessness")]
    pub harmlessness_tag: HarmlessnessTag,
    pub reward: f64,
}

/// The ordered list of preference categories and their rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySchema {
    categories: Vec<Category>,
}

impl CategorySchema {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        if categories.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "need at least 2 categories, got {}",
                categories.len()
            )));
        }
        for (k, cat) in categories.iter().enumerate() {
            if cat.id != k + 1 {
                return Err(Error::InvalidSchema(format!(
                    "ids must be 1..=d with no gaps; row {} has id {}",
                    k + 1,
                    cat.id
                )));
            }
            if !cat.reward.is_finite() {
                return Err(Error::InvalidSchema(format!(
                    "category {} has non-finite reward",
                    cat.id
                )));
            }
        }
        Ok(Self { categories })
    }

    /// The hybrid category table used throughout: helpful/neutral/not-helpful
    /// crossed with harmless/harmful, rewards 1, 0.5, -1, -1, -1.5, -3.
    pub fn default_six() -> Self {
        use HarmlessnessTag::*;
        use HelpfulnessTag::*;
        let rows = [
            (Helpful, Harmless, 1.0),
            (NeutralHelpful, Harmless, 0.5),
            (NotHelpful, Harmless, -1.0),
            (Helpful, Harmful, -1.0),
            (NeutralHelpful, Harmful, -1.5),
            (NotHelpful, Harmful, -3.0),
        ];
        let categories = rows
            .iter()
            .enumerate()
            .map(|(k, &(h, s, reward))| Category {
                id: k + 1,
                helpfulness_tag: h,
                harmlessness_tag: s,
                reward,
            })
            .collect();
        Self { categories }
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.categories.iter().map(|c| c.reward).collect()
    }

    /// 0-based index of the maximum-reward category (ties -> smallest id).
    pub fn ideal_index(&self) -> usize {
        let mut best = 0;
        for (k, cat) in self.categories.iter().enumerate() {
            if cat.reward > self.categories[best].reward {
                best = k;
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: CategorySchema = serde_json::from_str(text)?;
        Self::new(schema.categories)
    }
}

/// A point on the d-simplex: per-category probability mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PreferenceDistribution {
    probs: Vec<f64>,
}

impl<'de> Deserialize<'de> for PreferenceDistribution {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        PreferenceDistribution::new(probs).map_err(serde::de::Error::custom)
    }
}

impl PreferenceDistribution {
    /// Normalizes on construction. Rejects negatives (below -1e-12), NaNs,
    /// and vectors without positive total mass.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for &p in &probs {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution("non-finite entry".into()));
            }
            if p < -ONE_HOT_TOL {
                return Err(Error::InvalidDistribution(format!("negative entry {p}")));
            }
        }
        for p in &mut probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        if (total - 1.0).abs() > SIMPLEX_TOL {
            for p in &mut probs {
                *p /= total;
            }
        }
        Ok(Self { probs })
    }

    pub fn one_hot(d: usize, index: usize) -> Self {
        let mut probs = vec![0.0; d];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            probs: vec![1.0 / d as f64; d],
        }
    }

    /// Construction bypass for values already known to sit on the simplex.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the unique entry equal to 1, if this distribution is one-hot
    /// within [`ONE_HOT_TOL`].
    pub fn one_hot_index(&self) -> Option<usize> {
        let mut hit = None;
        for (k, &p) in self.probs.iter().enumerate() {
            if (p - 1.0).abs() <= ONE_HOT_TOL {
                if hit.is_some() {
                    return None;
                }
                hit = Some(k);
            } else if p > ONE_HOT_TOL {
                return None;
            }
        }
        hit
    }

    pub fn is_simplex(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p >= -tol) && (self.probs.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// A single user's one-hot label over a schema of `d` categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPreference {
    /// 0-based category index.
    index: usize,
    d: usize,
}

impl UserPreference {
    pub fn new(schema: &CategorySchema, category_id: usize) -> Result<Self> {
        if category_id == 0 || category_id > schema.len() {
            return Err(Error::InvalidDistribution(format!(
                "category id {category_id} outside 1..={}",
                schema.len()
            )));
        }
        Ok(Self {
            index: category_id - 1,
            d: schema.len(),
        })
    }

    /// 0-based index of the selected category.
    pub fn index(&self) -> usize {
        self.index
    }

    /// 1-based category id.
    pub fn category_id(&self) -> usize {
        self.index + 1
    }

    pub fn dist(&self) -> PreferenceDistribution {
        PreferenceDistribution::one_hot(self.d, self.index)
    }

    pub fn len(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }
}

/// A group's aggregated preference plus the population count behind it.
///
/// Internally stores weighted per-category mass rather than probabilities so
/// that folding one label at a time is exact integer arithmetic: updates
/// commute bit-for-bit and long streams accumulate no drift.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPreference {
    mass: Vec<f64>,
    size: u64,
}

impl GroupPreference {
    /// Build from an explicit distribution and population count.
    pub fn from_dist(dist: &PreferenceDistribution, size: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyGroup("group_size = 0 has no distribution"));
        }
        let mass = dist.probs().iter().map(|&p| p * size as f64).collect();
        Ok(Self { mass, size })
    }

    pub fn group_size(&self) -> u64 {
        self.size
    }

    pub fn dist(&self) -> PreferenceDistribution {
        let n = self.size as f64;
        PreferenceDistribution::from_normalized(self.mass.iter().map(|&m| m / n).collect())
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// True when every per-category mass is within `tol` of an integer,
    /// as it must be for groups built purely from counted labels.
    pub fn is_count_integral(&self, tol: f64) -> bool {
        self.mass.iter().all(|&m| (m - m.round()).abs() <= tol)
    }
}

/// Count one-hot labels into a group preference: entry j is the fraction of
/// users selecting category j, and the group size is the number of labels.
pub fn aggregate(labels: &[UserPreference]) -> Result<GroupPreference> {
    let first = labels
        .first()
        .ok_or(Error::EmptyGroup("cannot aggregate zero labels"))?;
    let d = first.len();
    let mut mass = vec![0.0; d];
    for label in labels {
        if label.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: label.len(),
            });
        }
        mass[label.index()] += 1.0;
    }
    Ok(GroupPreference {
        mass,
        size: labels.len() as u64,
    })
}

/// Absorb one new label into an existing group:
/// `probs'[j] = (probs[j] * |G| + l_j) / (|G| + 1)`, size grows by one.
pub fn posterior_update(
    group: &GroupPreference,
    new_label: &UserPreference,
) -> Result<GroupPreference> {
    if group.size == 0 {
        return Err(Error::EmptyGroup("posterior update requires |G| >= 1"));
    }
    if new_label.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: group.len(),
            got: new_label.len(),
        });
    }
    let mut mass = group.mass.clone();
    mass[new_label.index()] += 1.0;
    Ok(GroupPreference {
        mass,
        size: group.size + 1,
    })
}

/// How smoothing treats inputs that are not exactly one-hot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmoothingMode {
    /// Return non-degenerate inputs unchanged.
    #[default]
    Permissive,
    /// Reject non-degenerate inputs.
    Strict,
}

/// Targeted smoothing: move `alpha * (d-1)/d` mass from the certain bin to
/// the single cheapest other bin of the cost-matrix row (ties broken by the
/// smallest category id). All other bins stay untouched, so a `[1,0,...]`
/// input becomes near-certain rather than diffuse.
pub fn smooth_targeted(
    dist: &PreferenceDistribution,
    alpha: f64,
    cost: &CostMatrix,
    mode: SmoothingMode,
) -> Result<PreferenceDistribution> {
    validate_alpha(alpha)?;
    let d = dist.len();
    if cost.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cost.dim(),
        });
    }
    let Some(hot) = dist.one_hot_index() else {
        return match mode {
            SmoothingMode::Permissive => Ok(dist.clone()),
            SmoothingMode::Strict => Err(Error::NotDegenerate {
                max: dist
                    .probs()
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max),
            }),
        };
    };

    let mut receiver = usize::MAX;
    let mut best = f64::INFINITY;
    for j in 0..d {
        if j == hot {
            continue;
        }
        let c = cost.get(hot, j);
        if c < best {
            best = c;
            receiver = j;
        }
    }

    // Grouped as alpha * ((d-1)/d) so the default alpha lands exactly on
    // the 0.999/0.001 pair for d = 6.
    let moved = alpha * ((d - 1) as f64 / d as f64);
    let mut probs = vec![0.0; d];
    probs[hot] = 1.0 - moved;
    probs[receiver] = moved;
    Ok(PreferenceDistribution::from_normalized(probs))
}

/// Indiscriminate label smoothing: every entry maps to
/// `mu_i * (1 - alpha) + alpha / d`.
pub fn smooth_uniform(dist: &PreferenceDistribution, alpha: f64) -> Result<PreferenceDistribution> {
    validate_alpha(alpha)?;
    let d = dist.len() as f64;
    let probs = dist
        .probs()
        .iter()
        .map(|&p| p * (1.0 - alpha) + alpha / d)
        .collect();
    Ok(PreferenceDistribution::from_normalized(probs))
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::CostMatrix;

    fn schema() -> CategorySchema {
        CategorySchema::default_six()
    }

    fn label(id: usize) -> UserPreference {
        UserPreference::new(&schema(), id).unwrap()
    }

    #[test]
    fn default_schema_matches_reward_table() {
        let s = schema();
        assert_eq!(s.len(), 6);
        assert_eq!(s.rewards(), vec![1.0, 0.5, -1.0, -1.0, -1.5, -3.0]);
        assert_eq!(s.categories()[0].helpfulness_tag, HelpfulnessTag::Helpful);
        assert_eq!(s.categories()[5].harmlessness_tag, HarmlessnessTag::Harmful);
        assert_eq!(s.ideal_index(), 0);
    }

    #[test]
    fn schema_rejects_gaps_and_short_tables() {
        let mut cats = schema().categories().to_vec();
        cats[3].id = 7;
        assert!(CategorySchema::new(cats).is_err());
        let one = vec![schema().categories()[0].clone()];
        assert!(CategorySchema::new(one).is_err());
    }

    #[test]
    fn schema_json_round_trip_uses_stated_field_names() {
        let text = schema().to_json().unwrap();
        assert!(text.contains("\"helpfulness\""));
        assert!(text.contains("\"harmlessness\""));
        assert!(text.contains("\"reward\""));
        let back = CategorySchema::from_json(&text).unwrap();
        assert_eq!(back, schema());
    }

    #[test]
    fn aggregate_counts_labels() {
        // [c1, c1, c2] -> [2/3, 1/3, 0, 0, 0, 0], size 3
        let g = aggregate(&[label(1), label(1), label(2)]).unwrap();
        assert_eq!(g.group_size(), 3);
        let p = g.dist();
        assert!((p.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(&p.probs()[2..], &[0.0; 4]);
    }

    #[test]
    fn aggregate_single_label_is_one_hot() {
        let g = aggregate(&[label(4)]).unwrap();
        assert_eq!(g.group_size(), 1);
        assert_eq!(g.dist().probs(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregate_equal_counts_is_uniform() {
        let labels: Vec<_> = (1..=6).map(label).collect();
        let g = aggregate(&labels).unwrap();
        for &p in g.dist().probs() {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_empty_errors() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn posterior_update_matches_hand_arithmetic() {
        // ([0.5, 0.5, 0...], size 2) + c1 -> ([2/3, 1/3, 0...], size 3)
        let prior = GroupPreference::from_dist(
            &PreferenceDistribution::new(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            2,
        )
        .unwrap();
        let post = posterior_update(&prior, &label(1)).unwrap();
        assert_eq!(post.group_size(), 3);
        assert!((post.dist().probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((post.dist().probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn agreeing_update_is_fixed_point() {
        let prior = GroupPreference::from_dist(&PreferenceDistribution::one_hot(6, 0), 1).unwrap();
        let post = posterior_update(&prior, &label(1)).unwrap();
        assert_eq!(post.group_size(), 2);
        assert_eq!(post.dist().probs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sequential_updates_agree_with_batch_aggregate() {
        let seq = posterior_update(
            &posterior_update(&aggregate(&[label(1)]).unwrap(), &label(1)).unwrap(),
            &label(2),
        )
        .unwrap();
        let batch = aggregate(&[label(1), label(1), label(2)]).unwrap();
        for (a, b) in seq.dist().probs().iter().zip(batch.dist().probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(seq.group_size(), batch.group_size());
    }

    #[test]
    fn posterior_update_requires_nonempty_group() {
        let empty = GroupPreference {
            mass: vec![0.0; 6],
            size: 0,
        };
        assert!(matches!(
            posterior_update(&empty, &label(1)),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn empty_group_construction_is_an_error() {
        let dist = PreferenceDistribution::uniform(6);
        assert!(matches!(
            GroupPreference::from_dist(&dist, 0),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn targeted_smoothing_reproduces_near_certainty_example() {
        let cost = CostMatrix::from_schema(&schema());
        let e1 = PreferenceDistribution::one_hot(6, 0);
        let out =
            smooth_targeted(&e1, DEFAULT_SMOOTHING_ALPHA, &cost, SmoothingMode::Strict).unwrap();
        // Receiving bin is c2: the 0.5 reward gap is the unique row-1 minimum.
        assert_eq!(out.probs(), &[0.999, 0.001, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn targeted_smoothing_row_six_feeds_c5() {
        let cost = CostMatrix::from_schema(&schema());
        let e6 = PreferenceDistribution::one_hot(6, 5);
        let out =
            smooth_targeted(&e6, DEFAULT_SMOOTHING_ALPHA, &cost, SmoothingMode::Strict).unwrap();
        assert_eq!(out.probs(), &[0.0, 0.0, 0.0, 0.0, 0.001, 0.999]);
    }

    #[test]
    fn targeted_smoothing_permissive_passes_non_degenerate_through() {
        let cost = CostMatrix::from_schema(&schema());
        let soft = PreferenceDistribution::new(vec![0.9, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = smooth_targeted(&soft, 0.3, &cost, SmoothingMode::Permissive).unwrap();
        assert_eq!(out, soft);
        assert!(matches!(
            smooth_targeted(&soft, 0.3, &cost, SmoothingMode::Strict),
            Err(Error::NotDegenerate { .. })
        ));
    }

    #[test]
    fn targeted_smoothing_breaks_cost_ties_by_smallest_id() {
        // Row 3 of the default table has a zero-cost tie partner (c4) and the
        // minimum is unique; craft a schema with a genuine tie instead.
        let cats = vec![
            Category {
                id: 1,
                helpfulness_tag: HelpfulnessTag::Helpful,
                harmlessness_tag: HarmlessnessTag::Harmless,
                reward: 0.0,
            },
            Category {
                id: 2,
                helpfulness_tag: HelpfulnessTag::NeutralHelpful,
                harmlessness_tag: HarmlessnessTag::Harmless,
                reward: 1.0,
            },
            Category {
                id: 3,
                helpfulness_tag: HelpfulnessTag::NotHelpful,
                harmlessness_tag: HarmlessnessTag::Harmless,
                reward: -1.0,
            },
        ];
        let schema = CategorySchema::new(cats).unwrap();
        let cost = CostMatrix::from_schema(&schema);
        let e1 = PreferenceDistribution::one_hot(3, 0);
        let out = smooth_targeted(&e1, 0.3, &cost, SmoothingMode::Strict).unwrap();
        // Costs from row 1 are [_, 1, 1]; the tie goes to category 2.
        assert!(out.probs()[1] > 0.0);
        assert_eq!(out.probs()[2], 0.0);
    }

    #[test]
    fn uniform_smoothing_formula_values() {
        let e1 = PreferenceDistribution::one_hot(6, 0);
        let out = smooth_uniform(&e1, 0.06).unwrap();
        let expect = [0.95, 0.01, 0.01, 0.01, 0.01, 0.01];
        for (a, b) in out.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        let half = PreferenceDistribution::new(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = smooth_uniform(&half, 0.12).unwrap();
        let expect = [0.46, 0.46, 0.02, 0.02, 0.02, 0.02];
        for (a, b) in out.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_smoothing_fixes_uniform_input() {
        let u = PreferenceDistribution::uniform(6);
        let out = smooth_uniform(&u, 0.4).unwrap();
        for (a, b) in out.probs().iter().zip(u.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_domain_is_validated() {
        let cost = CostMatrix::from_schema(&schema());
        let e1 = PreferenceDistribution::one_hot(6, 0);
        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(smooth_uniform(&e1, bad).is_err());
            assert!(smooth_targeted(&e1, bad, &cost, SmoothingMode::Strict).is_err());
        }
    }

    #[test]
    fn distribution_normalizes_and_validates() {
        let p = PreferenceDistribution::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
        assert!(PreferenceDistribution::new(vec![]).is_err());
        assert!(PreferenceDistribution::new(vec![0.0, 0.0]).is_err());
        assert!(PreferenceDistribution::new(vec![-0.5, 1.5]).is_err());
        assert!(PreferenceDistribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn one_hot_detection() {
        assert_eq!(
            PreferenceDistribution::one_hot(6, 3).one_hot_index(),
            Some(3)
        );
        let soft = PreferenceDistribution::new(vec![0.9, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(soft.one_hot_index(), None);
    }
}
