//! Acceptance suite: one test per exit criterion, each printing a PASS
//! line when it holds (run with `--nocapture` to see them). Tolerances are
//! pinned in the assertions.

use dprm_lab::align::{align, truth_reward_table, win_rate, Policy, PpoConfig, SyntheticEnv};
use dprm_lab::annotate::{default_panel, generate_dataset, DatasetSpec, SyntheticSampler};
use dprm_lab::dprm::{
    ce_grad_logits, evaluate, loss_ce, loss_ot, ot_grad_logits, ot_training_objective, softmax,
    train, DistHead, Featurizer, FeaturizerConfig, LossKind, TrainConfig,
};
use dprm_lab::preference::{
    smooth_targeted, smooth_uniform, CategorySchema, PreferenceDistribution, SmoothingMode,
    DEFAULT_SMOOTHING_ALPHA,
};
use dprm_lab::reward::{expected_reward, ideal_distance};
use dprm_lab::rng::{derive_seed, rng_from, sample_simplex};
use dprm_lab::transport::{solve_exact, solve_sinkhorn, w1_line_oracle, wasserstein_p, CostMatrix};
use rand::Rng;

fn schema() -> CategorySchema {
    CategorySchema::default_six()
}

fn simplex(rng: &mut rand_chacha::ChaCha8Rng) -> PreferenceDistribution {
    PreferenceDistribution::new(sample_simplex(rng, 6)).expect("simplex")
}

#[test]
fn criterion_01_reward_table_fidelity() {
    let s = schema();
    assert_eq!(s.len(), 6);
    assert_eq!(s.rewards(), vec![1.0, 0.5, -1.0, -1.0, -1.5, -3.0]);
    let cost = CostMatrix::from_schema(&s);
    assert_eq!(cost.row(0), &[0.0, 0.5, 2.0, 2.0, 2.5, 4.0]);
    println!("criterion 01 reward-table fidelity: PASS (rewards and cost row exact)");
}

#[test]
fn criterion_02_smoothing_example() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let e1 = PreferenceDistribution::one_hot(6, 0);
    let out = smooth_targeted(&e1, DEFAULT_SMOOTHING_ALPHA, &cost, SmoothingMode::Strict)
        .expect("one-hot input");
    assert_eq!(out.probs(), &[0.999, 0.001, 0.0, 0.0, 0.0, 0.0]);
    println!("criterion 02 smoothing example: PASS ([0.999, 0.001, 0, 0, 0, 0] exact)");
}

#[test]
fn criterion_03_smoothing_bias_suite() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    for hot in 0..6usize {
        let e = PreferenceDistribution::one_hot(6, hot);
        for alpha in [0.01, 0.1, 0.3, 0.6, 0.9] {
            let t = smooth_targeted(&e, alpha, &cost, SmoothingMode::Strict).expect("one-hot");
            let u = smooth_uniform(&e, alpha).expect("alpha");
            let bias_t = wasserstein_p(&t, &e, &cost, 1.0).expect("solve");
            let bias_u = wasserstein_p(&u, &e, &cost, 1.0).expect("solve");
            assert!(
                bias_t <= bias_u + 1e-9,
                "i={} alpha={alpha}: targeted {bias_t} > uniform {bias_u}",
                hot + 1
            );
        }
    }
    let e1 = PreferenceDistribution::one_hot(6, 0);
    let t = smooth_targeted(&e1, 0.6, &cost, SmoothingMode::Strict).expect("one-hot");
    let u = smooth_uniform(&e1, 0.6).expect("alpha");
    let bias_t = wasserstein_p(&t, &e1, &cost, 1.0).expect("solve");
    let bias_u = wasserstein_p(&u, &e1, &cost, 1.0).expect("solve");
    assert!(
        (bias_t - 0.25).abs() <= 1e-9,
        "targeted spot value {bias_t}"
    );
    assert!((bias_u - 1.1).abs() <= 1e-9, "uniform spot value {bias_u}");
    println!("criterion 03 smoothing-bias suite: PASS (all i and alpha; spot 0.25 vs 1.1)");
}

#[test]
fn criterion_04_loss_separation_suite() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let target = PreferenceDistribution::new(vec![0.9, 0.1, 0.0, 0.0, 0.0, 0.0]).expect("simplex");
    let near = PreferenceDistribution::new(vec![0.9, 0.0, 0.1, 0.0, 0.0, 0.0]).expect("simplex");
    let far = PreferenceDistribution::new(vec![0.9, 0.0, 0.0, 0.0, 0.0, 0.1]).expect("simplex");
    let ce_gap = (loss_ce(&near, &target) - loss_ce(&far, &target)).abs();
    assert!(ce_gap <= 1e-9, "CE separated the predictions: gap {ce_gap}");
    let ot_near = loss_ot(&near, &target, &cost, false, 0.0).expect("solve");
    let ot_far = loss_ot(&far, &target, &cost, false, 0.0).expect("solve");
    assert!((ot_near - 0.15).abs() <= 1e-9, "near OT loss {ot_near}");
    assert!((ot_far - 0.35).abs() <= 1e-9, "far OT loss {ot_far}");
    println!("criterion 04 loss-separation suite: PASS (equal CE; OT losses 0.15 vs 0.35)");
}

#[test]
fn criterion_05_oracle_equivalence() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let mut rng = rng_from(derive_seed(1005, 0));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mu = simplex(&mut rng);
        let nu = simplex(&mut rng);
        let (plan, _) = solve_exact(&mu, &nu, &cost).expect("solve");
        let oracle = w1_line_oracle(&mu, &nu, &s).expect("oracle");
        worst = worst.max((plan.cost - oracle).abs());
    }
    assert!(worst <= 1e-9, "worst LP/oracle gap {worst}");
    println!("criterion 05 oracle equivalence: PASS (worst gap {worst:.3e} over 1000 pairs)");
}

#[test]
fn criterion_06_sinkhorn_convergence() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let mut rng = rng_from(derive_seed(1006, 0));
    let mut worst_gap: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    for _ in 0..200 {
        let mu = simplex(&mut rng);
        let nu = simplex(&mut rng);
        let (exact, _) = solve_exact(&mu, &nu, &cost).expect("solve");
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let sol = solve_sinkhorn(&mu, &nu, &cost, eps, 1e-11, 500_000).expect("converge");
            let err = (sol.plan.cost - exact.cost).abs();
            worst_rise = worst_rise.max(err - prev);
            prev = err;
            if (eps - 0.01).abs() < 1e-12 {
                worst_gap = worst_gap.max(err);
            }
        }
    }
    assert!(
        worst_gap <= 0.02,
        "sinkhorn(0.01) strayed {worst_gap} from exact"
    );
    assert!(
        worst_rise <= 1e-10,
        "error rose by {worst_rise} while shrinking eps"
    );
    println!(
        "criterion 06 sinkhorn convergence: PASS (worst gap {worst_gap:.3e}, monotone over the eps grid)"
    );
}

#[test]
fn criterion_07_gradient_checks() {
    let s = schema();
    let cost = CostMatrix::from_schema(&s);
    let eps = 0.05;
    for kind in [LossKind::Ce, LossKind::Ot] {
        let mut rng = rng_from(derive_seed(1007, kind as u64));
        let mut worst_rel: f64 = 0.0;
        for _ in 0..50 {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
            let target = simplex(&mut rng);
            let pred = softmax(&z);
            let analytic = match kind {
                LossKind::Ce => ce_grad_logits(&pred, &target),
                _ => ot_grad_logits(&pred, &target, &cost, eps).expect("sinkhorn"),
            };
            let delta = if kind == LossKind::Ce { 1e-6 } else { 1e-5 };
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
        assert!(
            worst_rel <= 1e-3,
            "{kind} gradient relative error {worst_rel}"
        );
        println!(
            "criterion 07 gradient check ({kind}): PASS (worst relative error {worst_rel:.3e})"
        );
    }
}

#[test]
fn criterion_08_reward_distance_equivalence() {
    let s = schema();
    let mut rng = rng_from(derive_seed(1008, 0));
    for trial in 0..10_000 {
        let a = simplex(&mut rng);
        let b = simplex(&mut rng);
        let dr =
            expected_reward(&b, &s).expect("reward") - expected_reward(&a, &s).expect("reward");
        let dd = ideal_distance(&b, &s, 1.0).expect("solve")
            - ideal_distance(&a, &s, 1.0).expect("solve");
        if dr.abs() < 1e-12 {
            assert!(
                dd.abs() <= 1e-9,
                "trial {trial}: reward tie, distance gap {dd}"
            );
        } else {
            assert!(
                dr * dd < 0.0,
                "trial {trial}: reward delta {dr} but distance delta {dd}"
            );
        }
    }
    println!("criterion 08 reward/distance equivalence: PASS (10000 pairs, zero counterexamples)");
}

#[test]
fn criterion_09_dominance_checks() {
    use dprm_lab::verify::{check_registry, VerifyOptions};
    let options = VerifyOptions::default();
    for name in ["panel_dominance_ordering", "same_pattern_reward_ranking"] {
        let (_, check) = check_registry()
            .into_iter()
            .find(|(n, _)| *n == name)
            .expect("registered check");
        let outcome = check(&options);
        assert!(outcome.passed(), "{name} failed: {}", outcome.detail);
        println!("criterion 09 {name}: PASS ({})", outcome.detail);
    }
}

#[test]
fn criterion_10_training_smoke() {
    let s = schema();
    let spec = DatasetSpec {
        n_pairs: 1000,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(s.clone(), 0);
    let (records, _) = generate_dataset(&spec, &mut client, 42, &s).expect("corpus");
    assert_eq!(records.len(), 2000);

    let featurizer = Featurizer::new(FeaturizerConfig { dim: 512, seed: 42 }).expect("config");
    let head = DistHead::zeros(featurizer.dim(), 6);
    let base = TrainConfig {
        epochs: 20,
        lr_start: 0.5,
        lr_end: 0.01,
        batch_size: 12,
        loss_kind: LossKind::Ot,
        sinkhorn_eps: 0.05,
        seed: 42,
    };

    let (ot_head, ot_curve) = train(&head, &records, &featurizer, &s, &base).expect("ot training");
    let initial = ot_curve.heldout_w1(0).expect("epoch 0 row");
    let best = ot_curve
        .heldout_w1(ot_curve.best_epoch)
        .expect("best checkpoint row");
    let reduction = (initial - best) / initial;
    assert!(
        reduction >= 0.30,
        "held-out W1 reduction {reduction:.3} below 30% ({initial} -> {best})"
    );

    let ce_config = TrainConfig {
        loss_kind: LossKind::Ce,
        ..base
    };
    let (ce_head, _) = train(&head, &records, &featurizer, &s, &ce_config).expect("ce training");
    let ot_eval = evaluate(&ot_head, &records, &featurizer, &s).expect("eval");
    let ce_eval = evaluate(&ce_head, &records, &featurizer, &s).expect("eval");
    assert!(
        ot_eval.mean_w1 <= ce_eval.mean_w1,
        "OT-trained W1 {} exceeds CE-trained {}",
        ot_eval.mean_w1,
        ce_eval.mean_w1
    );
    println!(
        "criterion 10 training smoke: PASS (held-out W1 {initial:.4} -> {best:.4}, {:.0}% reduction; OT {:.4} <= CE {:.4} under W1)",
        reduction * 100.0,
        ot_eval.mean_w1,
        ce_eval.mean_w1
    );
}

#[test]
fn criterion_11_alignment_smoke() {
    let s = schema();
    for seed in [0u64, 1, 2] {
        let env = SyntheticEnv::generate(16, 4, &default_panel(), seed, &s).expect("env");
        let rewards = truth_reward_table(&env, &s).expect("truth");
        let reference = Policy::uniform(env.n_prompts(), env.responses_per_prompt());
        let config = PpoConfig {
            steps: 600,
            seed,
            ..PpoConfig::default()
        };
        let (aligned, curves) = align(&reference, &env, &rewards, &config).expect("align");

        let decile = config.steps / 10;
        let first = curves.mean_total_reward_over(0..decile);
        let last = curves.mean_total_reward_over(config.steps - decile..config.steps);
        assert!(
            last > first,
            "seed {seed}: final decile {last} not above first decile {first}"
        );

        let rate = win_rate(&aligned, &reference, &env, 5000, seed, &s).expect("win rate");
        assert!(rate > 0.55, "seed {seed}: win rate {rate} not above 0.55");

        let anchored = PpoConfig {
            steps: 600,
            beta: 1e6,
            seed,
            ..PpoConfig::default()
        };
        let (_, kl_curves) = align(&reference, &env, &rewards, &anchored).expect("align");
        let final_kl = kl_curves.final_kl().expect("curve rows");
        assert!(
            final_kl <= 0.01,
            "seed {seed}: beta=1e6 final KL {final_kl}"
        );
        println!(
            "criterion 11 alignment smoke (seed {seed}): PASS (reward {first:+.3} -> {last:+.3}, win rate {rate:.3}, anchored KL {final_kl:.2e})"
        );
    }
}

#[test]
fn criterion_12_determinism() {
    use dprm_lab::cli::run;
    let root = tempfile::tempdir().expect("tempdir");
    let path = |name: &str| root.path().join(name).display().to_string();
    let read = |name: &str| std::fs::read_to_string(root.path().join(name)).expect("output file");
    let strip_timestamp = |text: &str| -> String {
        text.lines()
            .filter(|line| !line.contains("generated_at"))
            .collect::<Vec<_>>()
            .join("\n")
    };

    // Each subcommand runs twice with an identical command line; the second
    // run must reproduce every output byte (timestamps live only in the
    // generation manifest).
    let rerun_identical = |args: Vec<String>, outputs: &[&str], timestamped: &[&str]| {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(argv.clone()), 0, "first run of {argv:?}");
        let snapshot: Vec<String> = outputs.iter().map(|f| read(f)).collect();
        let stamped: Vec<String> = timestamped
            .iter()
            .map(|f| strip_timestamp(&read(f)))
            .collect();
        assert_eq!(run(argv.clone()), 0, "second run of {argv:?}");
        for (file, before) in outputs.iter().zip(&snapshot) {
            assert_eq!(&read(file), before, "{file} changed between identical runs");
        }
        for (file, before) in timestamped.iter().zip(&stamped) {
            assert_eq!(
                &strip_timestamp(&read(file)),
                before,
                "{file} changed beyond its timestamp"
            );
        }
    };

    let args = |list: &[&str]| -> Vec<String> { list.iter().map(|s| s.to_string()).collect() };

    rerun_identical(
        args(&[
            "gen-data",
            "--pairs",
            "40",
            "--seed",
            "9",
            "--out",
            &path("g"),
        ]),
        &["g/dataset.jsonl", "g/config.json"],
        &["g/manifest.json"],
    );

    let data = path("g/dataset.jsonl");
    rerun_identical(
        args(&[
            "train",
            "--data",
            &data,
            "--loss",
            "ot",
            "--epochs",
            "3",
            "--lr-start",
            "0.5",
            "--lr-end",
            "0.05",
            "--batch-size",
            "16",
            "--seed",
            "9",
            "--out",
            &path("t"),
        ]),
        &["t/checkpoint.json", "t/metrics.csv", "t/config.json"],
        &[],
    );

    let checkpoint = path("t/checkpoint.json");
    rerun_identical(
        args(&[
            "eval",
            "--data",
            &data,
            "--checkpoint",
            &checkpoint,
            "--out",
            &path("e"),
        ]),
        &["e/eval.json", "e/config.json"],
        &[],
    );

    rerun_identical(
        args(&[
            "align",
            "--prompts",
            "8",
            "--steps",
            "120",
            "--seed",
            "9",
            "--win-rate-n",
            "2000",
            "--out",
            &path("a"),
        ]),
        &[
            "a/curves.csv",
            "a/policy.json",
            "a/win_rate.json",
            "a/config.json",
        ],
        &[],
    );

    rerun_identical(
        args(&["verify", "--seed", "9", "--out", &path("v")]),
        &["v/verify_report.json", "v/config.json"],
        &[],
    );

    println!("criterion 12 determinism: PASS (all five subcommands byte-identical on re-run)");
}
