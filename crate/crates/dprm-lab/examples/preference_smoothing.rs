//! Crowd preference modelling: aggregate one-hot labels, fold in new ones,
//! and compare targeted smoothing against indiscriminate label smoothing.

use dprm_lab::preference::{
    aggregate, posterior_update, smooth_targeted, smooth_uniform, CategorySchema,
    PreferenceDistribution, SmoothingMode, UserPreference, DEFAULT_SMOOTHING_ALPHA,
};
use dprm_lab::transport::{wasserstein_p, CostMatrix};

fn main() -> dprm_lab::Result<()> {
    let schema = CategorySchema::default_six();
    let cost = CostMatrix::from_schema(&schema);

    println!("category rewards: {:?}", schema.rewards());

    // Three users label the same pair: two call it fully satisfying (c1),
    // one finds it merely adequate (c2).
    let labels: Vec<UserPreference> = [1, 1, 2]
        .iter()
        .map(|&id| UserPreference::new(&schema, id))
        .collect::<dprm_lab::Result<_>>()?;
    let group = aggregate(&labels)?;
    println!(
        "aggregated {} labels -> {:?}",
        group.group_size(),
        group.dist().probs()
    );

    // A fourth user disagrees; the posterior absorbs the label exactly.
    let dissent = UserPreference::new(&schema, 3)?;
    let updated = posterior_update(&group, &dissent)?;
    println!(
        "after one c3 label      -> {:?} (size {})",
        updated.dist().probs(),
        updated.group_size()
    );

    // Fully certain distributions get tempered before training. Targeted
    // smoothing moves a sliver of mass to the cheapest neighbour only.
    let certain = PreferenceDistribution::one_hot(6, 0);
    let targeted = smooth_targeted(
        &certain,
        DEFAULT_SMOOTHING_ALPHA,
        &cost,
        SmoothingMode::Strict,
    )?;
    println!("\ntargeted smoothing of e1 -> {:?}", targeted.probs());

    // Both operators, measured by the transport bias they introduce.
    println!("\nalpha    targeted-bias  uniform-bias");
    for alpha in [0.01, 0.1, 0.3, 0.6] {
        let t = smooth_targeted(&certain, alpha, &cost, SmoothingMode::Strict)?;
        let u = smooth_uniform(&certain, alpha)?;
        let bias_t = wasserstein_p(&t, &certain, &cost, 1.0)?;
        let bias_u = wasserstein_p(&u, &certain, &cost, 1.0)?;
        println!("{alpha:<8} {bias_t:<14.6} {bias_u:.6}");
    }
    Ok(())
}
