//! Build a preference-distribution corpus from the synthetic persona panel:
//! prior panel labels, Bayesian posterior correction, targeted smoothing.

use dprm_lab::annotate::{generate_dataset, DatasetSpec, SyntheticSampler};
use dprm_lab::dprm::records_to_jsonl;
use dprm_lab::preference::CategorySchema;
use dprm_lab::reward::expected_reward;

fn main() -> dprm_lab::Result<()> {
    let schema = CategorySchema::default_six();
    let spec = DatasetSpec {
        n_pairs: 50,
        ..DatasetSpec::default()
    };
    let mut client = SyntheticSampler::new(schema.clone(), 0);
    let (records, manifest) = generate_dataset(&spec, &mut client, 7, &schema)?;

    println!(
        "{} records from {} pairs ({} helpfulness / {} harmlessness)",
        manifest.records, manifest.n_pairs, manifest.helpfulness_pairs, manifest.harmlessness_pairs
    );
    println!(
        "smoothed {} records; {} pairs needed resampling; {} flagged inconsistent",
        manifest.smoothed_records, manifest.resampled_pairs, manifest.inconsistent_pairs
    );

    println!("\nfirst pair:");
    for record in &records[..2] {
        println!(
            "  {}  reward {:+.3}  target {:?}",
            record.id,
            expected_reward(&record.target, &schema)?,
            record.target.probs()
        );
        println!("    response: {:?}", record.response);
    }

    let jsonl = records_to_jsonl(&records)?;
    println!("\nJSONL line 1:\n{}", jsonl.lines().next().unwrap_or(""));
    Ok(())
}
