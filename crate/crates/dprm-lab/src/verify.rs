//! Executable property suite.
//!
//! Every structural claim the library leans on — smoothing bias ordering,
//! transport solver agreement, gradient correctness, reward/distance
//! equivalence, panel dominance, KL anchoring, dataset audits — runs here
//! as a named check producing a pass/fail status, a worst-case residual,
//! and the seeds involved. The report serializes to JSON for downstream
//! tooling. `inject_fault` deliberately breaks the reward-difference cost
//! matrix (asymmetrically) as a negative control: the reward/distance
//! equivalence check must then fail.

use serde::{Deserialize, Serialize};

use crate::align::{align, mean_policy_kl, truth_reward_table, Policy, PpoConfig, SyntheticEnv};
use crate::annotate::{
    default_panel, generate_dataset, sample_label, DatasetSpec, LatentQuality, Persona,
    SyntheticSampler,
};
use crate::dprm::{
    ce_grad_logits, loss_ce, loss_ot, ot_grad_logits, ot_training_objective, records_to_jsonl,
    softmax, DistHead, Featurizer, FeaturizerConfig, LossKind, Split, TrainConfig, CE_CLAMP,
};
use crate::preference::{
    aggregate, posterior_update, smooth_targeted, smooth_uniform, CategorySchema, GroupPreference,
    HarmlessnessTag, PreferenceDistribution, SmoothingMode, UserPreference,
};
use crate::reward::{expected_reward, ideal_distance_with_cost};
use crate::rng::{derive_seed, rng_from, sample_simplex};
use crate::transport::{solve_exact, solve_sinkhorn, w1_line_oracle, wasserstein_p, CostMatrix};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Break the cost matrix asymmetrically to prove the equivalence check
    /// has teeth.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub status: CheckStatus,
    /// Worst observed residual (violation magnitude or count).
    pub residual: f64,
    pub seeds: Vec<u64>,
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Constants and conventions the checks rely on, recorded for the reader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportNotes {
    /// Floor applied to predictions before `ln` inside the CE loss.
    pub ce_clamp: f64,
    /// The ideal preference is the one-hot on the maximum-reward category;
    /// it always has exactly d entries (d = 6 for the default schema).
    pub ideal_one_hot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub fault_injected: bool,
    pub passed: usize,
    pub failed: usize,
    pub notes: ReportNotes,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

type CheckFn = fn(&VerifyOptions) -> CheckResult;

/// The full registry, in execution order.
pub fn check_registry() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("simplex_conservation", check_simplex_conservation),
        (
            "sequential_batch_agreement",
            check_sequential_batch_agreement,
        ),
        ("update_order_invariance", check_update_order_invariance),
        ("bt_degenerate_ordering", check_bt_degenerate_ordering),
        ("targeted_smoothing_bias_bound", check_smoothing_bias_bound),
        ("plan_marginal_feasibility", check_plan_marginals),
        ("w1_symmetry", check_w1_symmetry),
        ("w1_triangle_inequality", check_w1_triangle),
        ("exact_matches_line_oracle", check_line_oracle),
        ("sinkhorn_monotone_in_eps", check_sinkhorn_monotone),
        ("duality_gap", check_duality_gap),
        ("ce_gradient_check", check_ce_gradient),
        ("ot_gradient_check", check_ot_gradient),
        ("transport_loss_separation", check_loss_separation),
        ("training_simplex_preservation", check_training_simplex),
        ("checkpoint_dominance", check_checkpoint_dominance),
        (
            "reward_distance_equivalence",
            check_reward_distance_equivalence,
        ),
        ("panel_dominance_ordering", check_panel_dominance),
        ("same_pattern_reward_ranking", check_same_pattern),
        ("kl_monotone_in_beta", check_kl_monotone),
        (
            "alignment_distance_tracks_reward",
            check_alignment_distance_tracks_reward,
        ),
        ("alignment_reproducibility", check_alignment_reproducibility),
        ("dataset_targets_valid", check_dataset_targets),
        ("chosen_beats_rejected", check_chosen_beats_rejected),
        ("persona_harm_monotonicity", check_persona_monotonicity),
    ]
}

pub fn check_names() -> Vec<&'static str> {
    check_registry().iter().map(|(name, _)| *name).collect()
}

/// Run every check and assemble the report.
pub fn run_all(options: &VerifyOptions) -> VerifyReport {
    let checks: Vec<CheckResult> = check_registry()
        .into_iter()
        .map(|(_, check)| check(options))
        .collect();
    let passed = checks.iter().filter(|c| c.passed()).count();
    VerifyReport {
        seed: options.seed,
        fault_injected: options.inject_fault,
        passed,
        failed: checks.len() - passed,
        notes: ReportNotes {
            ce_clamp: CE_CLAMP,
            ideal_one_hot:
                "one-hot on the maximum-reward category; always exactly d entries (6 by default)"
                    .into(),
        },
        checks,
    }
}

fn schema() -> CategorySchema {
    CategorySchema::default_six()
}

/// The cost matrix under test: reward-difference by default, or the same
/// matrix with `M[5][0]` inflated when a fault is injected. The fault is
/// asymmetric (`M[0][5]` keeps its value) and sits in the column the ideal
/// one-hot pulls mass into, so the equivalence check must notice.
fn cost_under_test(options: &VerifyOptions) -> CostMatrix {
    let base = CostMatrix::from_schema(&schema());
    if !options.inject_fault {
        return base;
    }
    let d = base.dim();
    let mut rows = vec![vec![0.0; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = base.get(i, j);
        }
    }
    rows[5][0] += 2.0;
    CostMatrix::from_rows(rows).expect("perturbed matrix stays valid")
}

fn result(
    name: &str,
    pass: bool,
    residual: f64,
    seeds: Vec<u64>,
    detail: impl Into<String>,
) -> CheckResult {
    CheckResult {
        check: name.into(),
        status: if pass {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        residual,
        seeds,
        detail: detail.into(),
    }
}

fn labels_from_ids(schema: &CategorySchema, ids: &[usize]) -> Vec<UserPreference> {
    ids.iter()
        .map(|&id| UserPreference::new(schema, id).expect("valid id"))
        .collect()
}

// --- preference checks -------------------------------------------------------

fn check_simplex_conservation(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let seed = derive_seed(options.seed, 1);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let alpha = rng.random_range(0.01..0.95);
        let hot = (rng.random::<u32>() as usize) % 6;
        let one_hot = PreferenceDistribution::one_hot(6, hot);
        let targeted =
            smooth_targeted(&one_hot, alpha, &cost, SmoothingMode::Strict).expect("one-hot input");
        let soft = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let uniform_sm = smooth_uniform(&soft, alpha).expect("valid alpha");
        let group = aggregate(&labels_from_ids(&s, &[1, 1, 2, 5])).expect("labels");
        let updated = posterior_update(&group, &labels_from_ids(&s, &[3])[0]).expect("update");
        for dist in [&targeted, &uniform_sm, &updated.dist()] {
            let sum: f64 = dist.probs().iter().sum();
            worst = worst.max((sum - 1.0).abs());
            if !dist.is_simplex(1e-9) {
                return result(
                    "simplex_conservation",
                    false,
                    (sum - 1.0).abs(),
                    vec![seed],
                    "an operation left the simplex",
                );
            }
        }
    }
    result(
        "simplex_conservation",
        worst <= 1e-9,
        worst,
        vec![seed],
        "smoothing and update operators preserve the simplex to 1e-9",
    )
}

fn check_sequential_batch_agreement(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 2);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let count = rng.random_range(1..40usize);
        let ids: Vec<usize> = (0..count)
            .map(|_| 1 + (rng.random::<u32>() as usize) % 6)
            .collect();
        let labels = labels_from_ids(&s, &ids);
        let batch = aggregate(&labels).expect("non-empty");
        let mut folded = aggregate(&labels[..1]).expect("seed label");
        for label in &labels[1..] {
            folded = posterior_update(&folded, label).expect("update");
        }
        for (a, b) in folded.dist().probs().iter().zip(batch.dist().probs()) {
            worst = worst.max((a - b).abs());
        }
    }
    result(
        "sequential_batch_agreement",
        worst <= 1e-9,
        worst,
        vec![seed],
        "folding single-label updates equals batch aggregation to 1e-9",
    )
}

fn check_update_order_invariance(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 3);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let count = rng.random_range(2..25usize);
        let mut ids: Vec<usize> = (0..count)
            .map(|_| 1 + (rng.random::<u32>() as usize) % 6)
            .collect();
        let prior = GroupPreference::from_dist(&PreferenceDistribution::uniform(6), 6)
            .expect("uniform prior");
        let fold = |ids: &[usize]| {
            let mut group = prior.clone();
            for label in labels_from_ids(&s, ids) {
                group = posterior_update(&group, &label).expect("update");
            }
            group
        };
        let forward = fold(&ids);
        ids.shuffle(&mut rng);
        let shuffled = fold(&ids);
        if forward != shuffled {
            for (a, b) in forward.dist().probs().iter().zip(shuffled.dist().probs()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    result(
        "update_order_invariance",
        worst == 0.0,
        worst,
        vec![seed],
        "posterior updates commute exactly over label permutations",
    )
}

fn check_bt_degenerate_ordering(options: &VerifyOptions) -> CheckResult {
    use crate::preference::{Category, HelpfulnessTag};
    let two = CategorySchema::new(vec![
        Category {
            id: 1,
            helpfulness_tag: HelpfulnessTag::Helpful,
            harmlessness_tag: HarmlessnessTag::Harmless,
            reward: 1.0,
        },
        Category {
            id: 2,
            helpfulness_tag: HelpfulnessTag::NotHelpful,
            harmlessness_tag: HarmlessnessTag::Harmless,
            reward: -1.0,
        },
    ])
    .expect("two-category schema");
    let seed = derive_seed(options.seed, 4);
    let mut rng = rng_from(seed);
    let mut violations = 0usize;
    for _ in 0..200 {
        let users = rng.random_range(1..30usize);
        // Every user prefers chosen: chosen labels are all category 1.
        let chosen = aggregate(&labels_from_ids(&two, &vec![1; users])).expect("labels");
        let rejected = aggregate(&labels_from_ids(&two, &vec![2; users])).expect("labels");
        let rc = expected_reward(&chosen.dist(), &two).expect("reward");
        let rr = expected_reward(&rejected.dist(), &two).expect("reward");
        if rc <= rr {
            violations += 1;
        }
    }
    result(
        "bt_degenerate_ordering",
        violations == 0,
        violations as f64,
        vec![seed],
        "unanimous pairwise preference implies strict expected-reward ordering",
    )
}

fn check_smoothing_bias_bound(_options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let alphas = [0.01, 0.1, 0.3, 0.6, 0.9];
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut detail = String::new();
    for hot in 0..6usize {
        let e = PreferenceDistribution::one_hot(6, hot);
        let row_costs: Vec<f64> = (0..6)
            .filter(|&j| j != hot)
            .map(|j| cost.get(hot, j))
            .collect();
        let all_equal = row_costs.iter().all(|&c| (c - row_costs[0]).abs() < 1e-12);
        for &alpha in &alphas {
            let targeted =
                smooth_targeted(&e, alpha, &cost, SmoothingMode::Strict).expect("one-hot");
            let uniform = smooth_uniform(&e, alpha).expect("alpha");
            let bias_t = wasserstein_p(&targeted, &e, &cost, 1.0).expect("solve");
            let bias_u = wasserstein_p(&uniform, &e, &cost, 1.0).expect("solve");
            let gap = bias_t - bias_u;
            worst = worst.max(gap);
            if gap > 1e-9 {
                pass = false;
                detail = format!(
                    "targeted bias exceeded uniform at i={} alpha={alpha}",
                    hot + 1
                );
            }
            if !all_equal && bias_u - bias_t < 1e-12 {
                pass = false;
                detail = format!("expected strict gap at i={} alpha={alpha}", hot + 1);
            }
        }
    }
    // Spot values: i=1, alpha=0.6 gives 0.25 (targeted) vs 1.1 (uniform).
    let e1 = PreferenceDistribution::one_hot(6, 0);
    let t = smooth_targeted(&e1, 0.6, &cost, SmoothingMode::Strict).expect("one-hot");
    let u = smooth_uniform(&e1, 0.6).expect("alpha");
    let bias_t = wasserstein_p(&t, &e1, &cost, 1.0).expect("solve");
    let bias_u = wasserstein_p(&u, &e1, &cost, 1.0).expect("solve");
    if (bias_t - 0.25).abs() > 1e-9 || (bias_u - 1.1).abs() > 1e-9 {
        pass = false;
        detail = format!("spot values drifted: targeted {bias_t}, uniform {bias_u}");
    }
    if detail.is_empty() {
        detail = "targeted smoothing bias never exceeds indiscriminate smoothing bias".into();
    }
    result(
        "targeted_smoothing_bias_bound",
        pass,
        worst.max(0.0),
        vec![],
        detail,
    )
}

// --- transport checks --------------------------------------------------------

fn check_plan_marginals(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 6);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for k in 0..400 {
        let mu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let nu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let violation = if k % 2 == 0 {
            let (plan, _) = solve_exact(&mu, &nu, &cost).expect("solve");
            plan.marginal_violation(mu.probs(), nu.probs())
        } else {
            let sol = solve_sinkhorn(&mu, &nu, &cost, 0.05, 1e-9, 200_000).expect("converge");
            sol.plan.marginal_violation(mu.probs(), nu.probs())
        };
        worst = worst.max(violation);
    }
    result(
        "plan_marginal_feasibility",
        worst <= 1e-7,
        worst,
        vec![seed],
        "row and column sums of returned plans match the marginals to 1e-7",
    )
}

fn check_w1_symmetry(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 7);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let mu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let nu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let ab = wasserstein_p(&mu, &nu, &cost, 1.0).expect("solve");
        let ba = wasserstein_p(&nu, &mu, &cost, 1.0).expect("solve");
        worst = worst.max((ab - ba).abs());
    }
    result(
        "w1_symmetry",
        worst <= 1e-9,
        worst,
        vec![seed],
        "W1 is symmetric to 1e-9 under the reward-difference cost",
    )
}

fn check_w1_triangle(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 8);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let b = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let c = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let ac = wasserstein_p(&a, &c, &cost, 1.0).expect("solve");
        let ab = wasserstein_p(&a, &b, &cost, 1.0).expect("solve");
        let bc = wasserstein_p(&b, &c, &cost, 1.0).expect("solve");
        worst = worst.max(ac - (ab + bc));
    }
    result(
        "w1_triangle_inequality",
        worst <= 1e-9,
        worst.max(0.0),
        vec![seed],
        "W1 satisfies the triangle inequality on 1000 seeded triples",
    )
}

fn check_line_oracle(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let seed = derive_seed(options.seed, 9);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let nu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let (plan, _) = solve_exact(&mu, &nu, &cost).expect("solve");
        let oracle = w1_line_oracle(&mu, &nu, &s).expect("oracle");
        worst = worst.max((plan.cost - oracle).abs());
    }
    result(
        "exact_matches_line_oracle",
        worst <= 1e-9,
        worst,
        vec![seed],
        "LP optimum equals the sorted-CDF closed form on 1000 seeded pairs",
    )
}

fn check_sinkhorn_monotone(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 10);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for _ in 0..20 {
        let mu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let nu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let (exact, _) = solve_exact(&mu, &nu, &cost).expect("solve");
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let sol = solve_sinkhorn(&mu, &nu, &cost, eps, 1e-11, 500_000).expect("converge");
            let err = (sol.plan.cost - exact.cost).abs();
            let rise = err - prev;
            worst = worst.max(rise);
            if rise > 1e-10 {
                pass = false;
            }
            prev = err;
        }
    }
    result(
        "sinkhorn_monotone_in_eps",
        pass,
        worst.max(0.0),
        vec![seed],
        "sinkhorn-vs-exact error never rises as eps decreases across the grid",
    )
}

fn check_duality_gap(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 11);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let nu = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let (plan, duals) = solve_exact(&mu, &nu, &cost).expect("solve");
        let gap = (plan.cost - duals.objective(mu.probs(), nu.probs())).abs();
        worst = worst.max(gap);
    }
    result(
        "duality_gap",
        worst <= 1e-7,
        worst,
        vec![seed],
        "primal cost equals dual objective to 1e-7 on every solve",
    )
}

// --- dprm checks ---------------------------------------------------------------

fn gradient_check(name: &str, options: &VerifyOptions, stream: u64, kind: LossKind) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let eps = 0.05;
    let seed = derive_seed(options.seed, stream);
    let mut rng = rng_from(seed);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..50 {
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
        let target = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let pred = softmax(&z);
        let analytic = match kind {
            LossKind::Ce => ce_grad_logits(&pred, &target),
            _ => ot_grad_logits(&pred, &target, &cost, eps).expect("sinkhorn"),
        };
        let delta = match kind {
            LossKind::Ce => 1e-6,
            _ => 1e-5,
        };
        let mut worst_abs: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..6 {
            let mut zp = z.clone();
            zp[k] += delta;
            let mut zm = z.clone();
            zm[k] -= delta;
            let (lp, lm) = match kind {
                LossKind::Ce => (
                    loss_ce(&softmax(&zp), &target),
                    loss_ce(&softmax(&zm), &target),
                ),
                _ => (
                    ot_training_objective(&softmax(&zp), &target, &cost, eps).expect("solve"),
                    ot_training_objective(&softmax(&zm), &target, &cost, eps).expect("solve"),
                ),
            };
            let fd = (lp - lm) / (2.0 * delta);
            worst_abs = worst_abs.max((analytic[k] - fd).abs());
            scale = scale.max(fd.abs());
        }
        worst_rel = worst_rel.max(worst_abs / scale.max(1e-6));
    }
    result(
        name,
        worst_rel <= 1e-3,
        worst_rel,
        vec![seed],
        "analytic logit gradients match central finite differences (relative 1e-3)",
    )
}

fn check_ce_gradient(options: &VerifyOptions) -> CheckResult {
    gradient_check("ce_gradient_check", options, 12, LossKind::Ce)
}

fn check_ot_gradient(options: &VerifyOptions) -> CheckResult {
    gradient_check("ot_gradient_check", options, 13, LossKind::Ot)
}

fn check_loss_separation(options: &VerifyOptions) -> CheckResult {
    let cost = CostMatrix::from_schema(&schema());
    let seed = derive_seed(options.seed, 14);
    let mut rng = rng_from(seed);
    let mut worst: f64 = 0.0;
    let mut pass = true;

    // The worked instance: target [0.9, 0.1, 0...], perturbations into c3
    // and c6 give OT losses 0.15 and 0.35 while CE cannot tell them apart.
    let target = PreferenceDistribution::new(vec![0.9, 0.1, 0.0, 0.0, 0.0, 0.0]).expect("simplex");
    let near = PreferenceDistribution::new(vec![0.9, 0.0, 0.1, 0.0, 0.0, 0.0]).expect("simplex");
    let far = PreferenceDistribution::new(vec![0.9, 0.0, 0.0, 0.0, 0.0, 0.1]).expect("simplex");
    let ce_gap = (loss_ce(&near, &target) - loss_ce(&far, &target)).abs();
    let ot_near = loss_ot(&near, &target, &cost, false, 0.0).expect("solve");
    let ot_far = loss_ot(&far, &target, &cost, false, 0.0).expect("solve");
    if ce_gap > 1e-9 || (ot_near - 0.15).abs() > 1e-9 || (ot_far - 0.35).abs() > 1e-9 {
        pass = false;
    }
    worst = worst
        .max(ce_gap)
        .max((ot_near - 0.15).abs())
        .max((ot_far - 0.35).abs());

    // Random instances: mass on bins {1,2}, eps mass moved from bin 1 to
    // two different destinations m != n with distinct row-1 costs.
    for _ in 0..100 {
        let head: f64 = rng.random_range(0.55..0.95);
        let base = vec![head, 1.0 - head, 0.0, 0.0, 0.0, 0.0];
        let eps_mass: f64 = rng.random_range(0.01..0.2);
        let pairs = [(2usize, 4usize), (2, 5), (4, 5), (1, 2)];
        let (m, n) = pairs[(rng.random::<u32>() as usize) % pairs.len()];
        let mut a = base.clone();
        a[0] -= eps_mass;
        a[m] += eps_mass;
        let mut b = base.clone();
        b[0] -= eps_mass;
        b[n] += eps_mass;
        let target = PreferenceDistribution::new(base).expect("simplex");
        let pa = PreferenceDistribution::new(a).expect("simplex");
        let pb = PreferenceDistribution::new(b).expect("simplex");
        let la = loss_ot(&pa, &target, &cost, false, 0.0).expect("solve");
        let lb = loss_ot(&pb, &target, &cost, false, 0.0).expect("solve");
        let want = eps_mass * (cost.get(0, m) - cost.get(0, n)).abs();
        let got = (la - lb).abs();
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-9 {
            pass = false;
        }
    }
    result(
        "transport_loss_separation",
        pass,
        worst,
        vec![seed],
        "transport loss separates equal-CE perturbations by exactly eps * cost gap",
    )
}

fn training_fixture(seed: u64) -> (Vec<crate::dprm::PreferenceRecord>, Featurizer) {
    let s = schema();
    let spec = DatasetSpec {
        n_pairs: 80,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(s.clone(), 0);
    let (records, _) = generate_dataset(&spec, &mut client, seed, &s).expect("generate");
    let featurizer = Featurizer::new(FeaturizerConfig { dim: 256, seed: 0 }).expect("even dim");
    (records, featurizer)
}

fn check_training_simplex(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 15);
    let (records, featurizer) = training_fixture(seed);
    let head = DistHead::zeros(featurizer.dim(), 6);
    let config = TrainConfig {
        epochs: 3,
        lr_start: 0.5,
        lr_end: 0.05,
        batch_size: 16,
        loss_kind: LossKind::Ot,
        sinkhorn_eps: 0.05,
        seed,
    };
    let (best, _) = match crate::dprm::train(&head, &records, &featurizer, &s, &config) {
        Ok(bundle) => bundle,
        Err(e) => {
            return result(
                "training_simplex_preservation",
                false,
                f64::NAN,
                vec![seed],
                e.to_string(),
            )
        }
    };
    let mut worst: f64 = 0.0;
    for record in &records {
        let features = featurizer
            .featurize(&record.prompt, &record.response)
            .expect("non-empty");
        let pred = best.predict(&features).expect("dims");
        let sum: f64 = pred.probs().iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if !pred.is_simplex(1e-9) {
            return result(
                "training_simplex_preservation",
                false,
                (sum - 1.0).abs(),
                vec![seed],
                "a trained prediction left the simplex",
            );
        }
    }
    result(
        "training_simplex_preservation",
        worst <= 1e-9,
        worst,
        vec![seed],
        "every trained prediction stays on the simplex",
    )
}

fn check_checkpoint_dominance(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 16);
    let (records, featurizer) = training_fixture(seed);
    let head = DistHead::zeros(featurizer.dim(), 6);
    let config = TrainConfig {
        epochs: 5,
        lr_start: 0.8,
        lr_end: 0.05,
        batch_size: 16,
        loss_kind: LossKind::Ot,
        sinkhorn_eps: 0.05,
        seed,
    };
    let (_, curve) = match crate::dprm::train(&head, &records, &featurizer, &s, &config) {
        Ok(bundle) => bundle,
        Err(e) => {
            return result(
                "checkpoint_dominance",
                false,
                f64::NAN,
                vec![seed],
                e.to_string(),
            )
        }
    };
    let best = curve.heldout_loss(curve.best_epoch).expect("best row");
    let mut worst: f64 = 0.0;
    for row in curve.rows.iter().filter(|r| r.split == Split::Heldout) {
        worst = worst.max(best - row.mean_loss);
    }
    result(
        "checkpoint_dominance",
        worst <= 1e-12,
        worst.max(0.0),
        vec![seed],
        "the returned checkpoint's held-out loss is minimal over all epochs",
    )
}

// --- reward checks -------------------------------------------------------------

fn check_reward_distance_equivalence(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let cost = cost_under_test(options);
    let seed = derive_seed(options.seed, 17);
    let mut rng = rng_from(seed);
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let b = PreferenceDistribution::new(sample_simplex(&mut rng, 6)).expect("simplex");
        let dr =
            expected_reward(&b, &s).expect("reward") - expected_reward(&a, &s).expect("reward");
        let dd = ideal_distance_with_cost(&b, &s, &cost, 1.0).expect("solve")
            - ideal_distance_with_cost(&a, &s, &cost, 1.0).expect("solve");
        if dr.abs() < 1e-12 {
            if dd.abs() > 1e-9 {
                violations += 1;
                worst = worst.max(dd.abs());
            }
        } else if dr * dd >= 0.0 {
            violations += 1;
            worst = worst.max(dd.abs());
        }
    }
    result(
        "reward_distance_equivalence",
        violations == 0,
        violations as f64,
        vec![seed],
        "higher expected reward exactly when closer to the ideal one-hot (10k pairs)",
    )
}

fn check_panel_dominance(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 18);
    let mut rng = rng_from(seed);
    let panel = default_panel();
    let mut qualifying = 0usize;
    let mut violations = 0usize;
    for trial in 0..2000 {
        let better = LatentQuality {
            helpfulness: rng.random_range(0.2..1.0),
            harm: rng.random_range(0.0..0.2),
        };
        let worse = LatentQuality {
            helpfulness: rng.random_range(-1.0..better.helpfulness - 0.2),
            harm: rng.random_range(better.harm..1.0_f64.min(better.harm + 0.6)),
        };
        let mut labels_better = Vec::new();
        let mut labels_worse = Vec::new();
        let mut weak = true;
        let mut strict = false;
        for (k, persona) in panel.iter().enumerate() {
            let ls = derive_seed(seed, (trial as u64) << 8 ^ (k as u64) << 1);
            let lb = sample_label(persona, &better, ls, &s);
            let lw = sample_label(persona, &worse, ls ^ 1, &s);
            let rb = s.categories()[lb.index()].reward;
            let rw = s.categories()[lw.index()].reward;
            if rb < rw {
                weak = false;
                break;
            }
            if rb > rw {
                strict = true;
            }
            labels_better.push(lb);
            labels_worse.push(lw);
        }
        if !(weak && strict) {
            continue;
        }
        qualifying += 1;
        let gb = aggregate(&labels_better).expect("labels");
        let gw = aggregate(&labels_worse).expect("labels");
        if expected_reward(&gb.dist(), &s).expect("reward")
            <= expected_reward(&gw.dist(), &s).expect("reward")
        {
            violations += 1;
        }
    }
    result(
        "panel_dominance_ordering",
        violations == 0 && qualifying > 100,
        violations as f64,
        vec![seed],
        format!("{qualifying} panels satisfied weak dominance; all ranked strictly"),
    )
}

fn check_same_pattern(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 19);
    // Seven copies of one near-deterministic judge: a panel with a single
    // preference pattern.
    let judge = Persona::new("Uniformist", 0.0, 1.0, 1e-3, 1).expect("persona");
    let spec = DatasetSpec {
        n_pairs: 150,
        panel: vec![judge; 7],
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(s.clone(), 0);
    let (records, _) = match generate_dataset(&spec, &mut client, seed, &s) {
        Ok(bundle) => bundle,
        Err(e) => {
            return result(
                "same_pattern_reward_ranking",
                false,
                f64::NAN,
                vec![seed],
                e.to_string(),
            )
        }
    };
    let mut violations = 0usize;
    let mut scored_pairs = 0usize;
    for pair in records.chunks(2) {
        if pair[0].inconsistent {
            continue;
        }
        scored_pairs += 1;
        let rc = expected_reward(&pair[0].target, &s).expect("reward");
        let rr = expected_reward(&pair[1].target, &s).expect("reward");
        if rc <= rr {
            violations += 1;
        }
    }
    result(
        "same_pattern_reward_ranking",
        violations == 0 && scored_pairs * 2 > spec.n_pairs,
        violations as f64,
        vec![seed],
        format!("{scored_pairs} unflagged pairs all rank chosen above rejected"),
    )
}

// --- align checks ---------------------------------------------------------------

fn small_env(seed: u64) -> SyntheticEnv {
    SyntheticEnv::generate(10, 4, &default_panel(), seed, &schema()).expect("env")
}

fn check_kl_monotone(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 20);
    let env = small_env(seed);
    let rewards = truth_reward_table(&env, &s).expect("truth");
    let policy = Policy::uniform(env.n_prompts(), env.responses_per_prompt());
    let mut prev = f64::INFINITY;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for beta in [0.0, 0.1, 1.0, 10.0] {
        let config = PpoConfig {
            steps: 120,
            batch: 64,
            beta,
            seed,
            ..PpoConfig::default()
        };
        let (aligned, _) = match align(&policy, &env, &rewards, &config) {
            Ok(out) => out,
            Err(e) => {
                return result(
                    "kl_monotone_in_beta",
                    false,
                    f64::NAN,
                    vec![seed],
                    e.to_string(),
                )
            }
        };
        let kl = mean_policy_kl(&aligned, &policy).expect("kl");
        let rise = kl - prev * 1.05;
        worst = worst.max(rise);
        if rise > 1e-9 {
            pass = false;
        }
        prev = kl;
    }
    result(
        "kl_monotone_in_beta",
        pass,
        worst.max(0.0),
        vec![seed],
        "mean KL to the reference never rises as beta grows (5% slack)",
    )
}

fn check_alignment_distance_tracks_reward(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let mut pass = true;
    let mut detail = String::new();
    let mut seeds = Vec::new();
    for offset in 0..3u64 {
        let seed = derive_seed(options.seed, 21 + offset);
        seeds.push(seed);
        let env = small_env(seed);
        let rewards = truth_reward_table(&env, &s).expect("truth");
        let policy = Policy::uniform(env.n_prompts(), env.responses_per_prompt());
        let config = PpoConfig {
            steps: 200,
            batch: 64,
            seed,
            ..PpoConfig::default()
        };
        let (aligned, _) = match align(&policy, &env, &rewards, &config) {
            Ok(out) => out,
            Err(e) => {
                return result(
                    "alignment_distance_tracks_reward",
                    false,
                    f64::NAN,
                    seeds,
                    e.to_string(),
                )
            }
        };
        let reward_before = crate::align::policy_mean_reward(&policy, &env, &s).expect("mean");
        let reward_after = crate::align::policy_mean_reward(&aligned, &env, &s).expect("mean");
        let dist_before =
            crate::align::policy_mean_ideal_distance(&policy, &env, &s).expect("mean");
        let dist_after =
            crate::align::policy_mean_ideal_distance(&aligned, &env, &s).expect("mean");
        if reward_after > reward_before && dist_after >= dist_before {
            pass = false;
            detail = format!(
                "seed {seed}: reward rose {reward_before} -> {reward_after} but distance {dist_before} -> {dist_after}"
            );
        }
    }
    if detail.is_empty() {
        detail = "higher mean reward came with lower mean ideal distance on every seed".into();
    }
    result("alignment_distance_tracks_reward", pass, 0.0, seeds, detail)
}

fn check_alignment_reproducibility(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 24);
    let env = small_env(seed);
    let rewards = truth_reward_table(&env, &s).expect("truth");
    let policy = Policy::uniform(env.n_prompts(), env.responses_per_prompt());
    let config = PpoConfig {
        steps: 80,
        batch: 32,
        seed,
        ..PpoConfig::default()
    };
    let run = || align(&policy, &env, &rewards, &config).expect("align");
    let (pa, ca) = run();
    let (pb, cb) = run();
    let pass = pa == pb && ca == cb;
    result(
        "alignment_reproducibility",
        pass,
        if pass { 0.0 } else { 1.0 },
        vec![seed],
        "identical seeds produce identical policies and curves",
    )
}

// --- annotate checks -------------------------------------------------------------

fn check_dataset_targets(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 25);
    let spec = DatasetSpec {
        n_pairs: 150,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(s.clone(), 0);
    let (records, manifest) = match generate_dataset(&spec, &mut client, seed, &s) {
        Ok(bundle) => bundle,
        Err(e) => {
            return result(
                "dataset_targets_valid",
                false,
                f64::NAN,
                vec![seed],
                e.to_string(),
            )
        }
    };
    let expected_top = 1.0 - spec.alpha_smooth * ((s.len() - 1) as f64 / s.len() as f64);
    let mut worst: f64 = 0.0;
    let mut pass = records.len() == 2 * spec.n_pairs;
    let mut flagged = 0usize;
    for record in &records {
        if !record.target.is_simplex(1e-9) {
            pass = false;
        }
        if record.smoothed {
            flagged += 1;
            let top = record
                .target
                .probs()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((top - expected_top).abs());
            if (top - expected_top).abs() > 1e-12 {
                pass = false;
            }
        } else {
            let group = GroupPreference::from_dist(&record.target, record.group_size)
                .expect("positive size");
            if !group.is_count_integral(1e-6) {
                pass = false;
            }
        }
    }
    if flagged != manifest.smoothed_records {
        pass = false;
    }
    // JSONL round trip must preserve everything bit for bit.
    let text = records_to_jsonl(&records).expect("serialize");
    let back = crate::dprm::records_from_jsonl(&text).expect("parse");
    if back != records {
        pass = false;
    }
    result(
        "dataset_targets_valid",
        pass,
        worst,
        vec![seed],
        "targets are simplex-valid, counts integral before smoothing, flags consistent",
    )
}

fn check_chosen_beats_rejected(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 26);
    let spec = DatasetSpec {
        n_pairs: 200,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(s.clone(), 0);
    let (records, manifest) = match generate_dataset(&spec, &mut client, seed, &s) {
        Ok(bundle) => bundle,
        Err(e) => {
            return result(
                "chosen_beats_rejected",
                false,
                f64::NAN,
                vec![seed],
                e.to_string(),
            )
        }
    };
    let mut violations = 0usize;
    for pair in records.chunks(2) {
        if pair[0].inconsistent {
            continue;
        }
        let rc = expected_reward(&pair[0].target, &s).expect("reward");
        let rr = expected_reward(&pair[1].target, &s).expect("reward");
        if rc <= rr {
            violations += 1;
        }
    }
    let clean_fraction =
        (manifest.n_pairs - manifest.resampled_pairs) as f64 / manifest.n_pairs as f64;
    result(
        "chosen_beats_rejected",
        violations == 0 && clean_fraction > 0.95,
        violations as f64,
        vec![seed],
        format!(
            "no unflagged ordering violations; {:.1}% of pairs needed no resampling",
            clean_fraction * 100.0
        ),
    )
}

fn check_persona_monotonicity(options: &VerifyOptions) -> CheckResult {
    let s = schema();
    let seed = derive_seed(options.seed, 27);
    let quality = LatentQuality {
        helpfulness: 0.3,
        harm: 0.6,
    };
    let n = 4000usize;
    let mut prev = f64::INFINITY;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for step in 0..7 {
        let sensitivity = 0.2 + step as f64 * 0.25;
        let persona = Persona::new("Sweep", 0.0, sensitivity, 0.5, 1).expect("persona");
        let mut harmless = 0usize;
        for k in 0..n {
            let label = sample_label(
                &persona,
                &quality,
                derive_seed(seed, (step as u64) << 32 ^ k as u64),
                &s,
            );
            if s.categories()[label.index()].harmlessness_tag == HarmlessnessTag::Harmless {
                harmless += 1;
            }
        }
        let frac = harmless as f64 / n as f64;
        let sigma = (frac.max(0.01) * (1.0 - frac.max(0.01)) / n as f64).sqrt();
        let rise = frac - (prev + 3.0 * sigma);
        worst = worst.max(rise);
        if rise > 0.0 {
            pass = false;
        }
        prev = frac;
    }
    result(
        "persona_harm_monotonicity",
        pass,
        worst.max(0.0),
        vec![seed],
        "harm-sensitive judges never assign more harmless mass (3-sigma Monte Carlo)",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes_on_the_default_seed() {
        let report = run_all(&VerifyOptions::default());
        for check in &report.checks {
            assert!(
                check.passed(),
                "{} failed: {} (residual {})",
                check.check,
                check.detail,
                check.residual
            );
        }
        assert!(report.all_passed());
        assert_eq!(report.checks.len(), check_names().len());
    }

    #[test]
    fn fault_injection_fails_the_equivalence_check_only() {
        let report = run_all(&VerifyOptions {
            seed: 0,
            inject_fault: true,
        });
        let equivalence = report
            .checks
            .iter()
            .find(|c| c.check == "reward_distance_equivalence")
            .expect("check exists");
        assert!(!equivalence.passed(), "fault injection went unnoticed");
        assert!(!report.all_passed());
    }

    #[test]
    fn report_serializes_with_notes() {
        let report = run_all(&VerifyOptions::default());
        let json = report.to_json().unwrap();
        assert!(json.contains("\"ce_clamp\": 1e-12"));
        assert!(json.contains("reward_distance_equivalence"));
    }

    #[test]
    fn check_names_are_unique() {
        let names = check_names();
        let mut dedup = names.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(names.len(), dedup.len());
    }
}
