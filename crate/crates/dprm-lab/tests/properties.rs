//! Property-based invariants over random simplex points and label sets.

use dprm_lab::dprm::{loss_ce, softmax};
use dprm_lab::preference::{
    aggregate, posterior_update, smooth_targeted, smooth_uniform, CategorySchema,
    PreferenceDistribution, SmoothingMode, UserPreference,
};
use dprm_lab::reward::{expected_reward, ideal_distance, kl_divergence};
use dprm_lab::transport::{solve_exact, w1_line_oracle, wasserstein_p, CostMatrix};
use proptest::prelude::*;

fn schema() -> CategorySchema {
    CategorySchema::default_six()
}

/// Strictly positive weights normalized onto the simplex.
fn simplex6() -> impl Strategy<Value = PreferenceDistribution> {
    prop::collection::vec(1e-6f64..1.0, 6).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        PreferenceDistribution::new(raw.into_iter().map(|x| x / total).collect()).unwrap()
    })
}

fn labels() -> impl Strategy<Value = Vec<UserPreference>> {
    prop::collection::vec(1usize..=6, 1..40).prop_map(|ids| {
        let s = schema();
        ids.into_iter()
            .map(|id| UserPreference::new(&s, id).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn smoothing_preserves_the_simplex(alpha in 0.001f64..0.999, hot in 0usize..6) {
        let cost = CostMatrix::from_schema(&schema());
        let e = PreferenceDistribution::one_hot(6, hot);
        let t = smooth_targeted(&e, alpha, &cost, SmoothingMode::Strict).unwrap();
        prop_assert!(t.is_simplex(1e-9));
        let u = smooth_uniform(&e, alpha).unwrap();
        prop_assert!(u.is_simplex(1e-9));
    }

    #[test]
    fn targeted_bias_never_exceeds_uniform_bias(alpha in 0.001f64..0.999, hot in 0usize..6) {
        let cost = CostMatrix::from_schema(&schema());
        let e = PreferenceDistribution::one_hot(6, hot);
        let t = smooth_targeted(&e, alpha, &cost, SmoothingMode::Strict).unwrap();
        let u = smooth_uniform(&e, alpha).unwrap();
        let bias_t = wasserstein_p(&t, &e, &cost, 1.0).unwrap();
        let bias_u = wasserstein_p(&u, &e, &cost, 1.0).unwrap();
        prop_assert!(bias_t <= bias_u + 1e-9, "targeted {bias_t} vs uniform {bias_u}");
    }

    #[test]
    fn folded_updates_equal_batch_aggregation(labels in labels()) {
        let batch = aggregate(&labels).unwrap();
        let mut folded = aggregate(&labels[..1]).unwrap();
        for label in &labels[1..] {
            folded = posterior_update(&folded, label).unwrap();
        }
        prop_assert_eq!(folded.group_size(), batch.group_size());
        for (a, b) in folded.dist().probs().iter().zip(batch.dist().probs()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn update_order_never_matters(labels in labels(), swap_a in 0usize..40, swap_b in 0usize..40) {
        let mut shuffled = labels.clone();
        let n = shuffled.len();
        shuffled.swap(swap_a % n, swap_b % n);
        let a = aggregate(&labels).unwrap();
        let b = aggregate(&shuffled).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_matches_the_line_oracle(mu in simplex6(), nu in simplex6()) {
        let s = schema();
        let cost = CostMatrix::from_schema(&s);
        let (plan, duals) = solve_exact(&mu, &nu, &cost).unwrap();
        let oracle = w1_line_oracle(&mu, &nu, &s).unwrap();
        prop_assert!((plan.cost - oracle).abs() <= 1e-9, "{} vs {}", plan.cost, oracle);
        let gap = (plan.cost - duals.objective(mu.probs(), nu.probs())).abs();
        prop_assert!(gap <= 1e-7, "duality gap {gap}");
        prop_assert!(plan.marginal_violation(mu.probs(), nu.probs()) <= 1e-7);
    }

    #[test]
    fn w1_is_a_symmetric_metric(a in simplex6(), b in simplex6(), c in simplex6()) {
        let cost = CostMatrix::from_schema(&schema());
        let ab = wasserstein_p(&a, &b, &cost, 1.0).unwrap();
        let ba = wasserstein_p(&b, &a, &cost, 1.0).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        let ac = wasserstein_p(&a, &c, &cost, 1.0).unwrap();
        let bc = wasserstein_p(&b, &c, &cost, 1.0).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        let aa = wasserstein_p(&a, &a, &cost, 1.0).unwrap();
        prop_assert!(aa.abs() <= 1e-9);
    }

    #[test]
    fn reward_and_ideal_distance_order_oppositely(a in simplex6(), b in simplex6()) {
        let s = schema();
        let dr = expected_reward(&b, &s).unwrap() - expected_reward(&a, &s).unwrap();
        let dd = ideal_distance(&b, &s, 1.0).unwrap() - ideal_distance(&a, &s, 1.0).unwrap();
        if dr.abs() < 1e-12 {
            prop_assert!(dd.abs() <= 1e-9);
        } else {
            prop_assert!(dr * dd < 0.0, "reward delta {dr}, distance delta {dd}");
        }
    }

    #[test]
    fn softmax_lands_on_the_simplex(logits in prop::collection::vec(-30.0f64..30.0, 6)) {
        let pred = softmax(&logits);
        prop_assert!(pred.is_simplex(1e-9));
    }

    #[test]
    fn gibbs_inequality_for_clamped_ce(p in simplex6(), t in simplex6()) {
        // Cross-entropy against an interior target is minimized at the
        // target itself.
        prop_assert!(loss_ce(&p, &t) + 1e-9 >= loss_ce(&t, &t));
        prop_assert!(loss_ce(&p, &t) >= 0.0);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_equality(p in simplex6(), q in simplex6()) {
        let kl = kl_divergence(p.probs(), q.probs()).unwrap();
        prop_assert!(kl >= 0.0);
        let self_kl = kl_divergence(p.probs(), p.probs()).unwrap();
        prop_assert!(self_kl.abs() <= 1e-12);
    }
}
