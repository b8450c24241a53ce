//! Train the distributional head twice — cross-entropy vs optimal
//! transport — on one synthetic corpus and compare what each optimizes.

use dprm_lab::annotate::{generate_dataset, DatasetSpec, SyntheticSampler};
use dprm_lab::dprm::{
    evaluate, train, DistHead, Featurizer, FeaturizerConfig, LossKind, TrainConfig,
};
use dprm_lab::preference::CategorySchema;

fn main() -> dprm_lab::Result<()> {
    let schema = CategorySchema::default_six();
    let spec = DatasetSpec {
        n_pairs: 250,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(schema.clone(), 0);
    let (records, _) = generate_dataset(&spec, &mut client, 11, &schema)?;
    println!("corpus: {} records", records.len());

    let featurizer = Featurizer::new(FeaturizerConfig::default())?;
    let head = DistHead::zeros(featurizer.dim(), schema.len());

    println!("\nloss  best-epoch  heldout-loss  mean-W1  mean-CE  reward-MAE");
    for kind in [LossKind::Ce, LossKind::Ot] {
        let config = TrainConfig {
            epochs: 12,
            lr_start: 0.5,
            lr_end: 0.02,
            batch_size: 12,
            loss_kind: kind,
            sinkhorn_eps: 0.05,
            seed: 5,
        };
        let (best, curve) = train(&head, &records, &featurizer, &schema, &config)?;
        let metrics = evaluate(&best, &records, &featurizer, &schema)?;
        println!(
            "{kind:<5} {:<11} {:<13.4} {:<8.4} {:<8.4} {:.4}",
            curve.best_epoch,
            curve.heldout_loss(curve.best_epoch).unwrap_or(f64::NAN),
            metrics.mean_w1,
            metrics.mean_ce,
            metrics.reward_mae
        );
        if kind == LossKind::Ot {
            println!("\nper-category mean predicted mass (OT-trained):");
            for (cat, (m, s)) in schema
                .categories()
                .iter()
                .zip(metrics.mean_mass.iter().zip(&metrics.std_mass))
            {
                println!(
                    "  c{} {:?}/{:?}: {:.3} +/- {:.3}",
                    cat.id, cat.helpfulness_tag, cat.harmlessness_tag, m, s
                );
            }
        }
    }
    Ok(())
}
