//! Clipped-PPO alignment on the synthetic environment: reward rises, the
//! KL leash holds, and the aligned policy beats its frozen reference.

use dprm_lab::align::{
    align, policy_mean_ideal_distance, policy_mean_reward, truth_reward_table, win_rate, Policy,
    PpoConfig, SyntheticEnv,
};
use dprm_lab::annotate::default_panel;
use dprm_lab::preference::CategorySchema;

fn main() -> dprm_lab::Result<()> {
    let schema = CategorySchema::default_six();
    let env = SyntheticEnv::generate(16, 4, &default_panel(), 3, &schema)?;
    let rewards = truth_reward_table(&env, &schema)?;
    let reference = Policy::uniform(env.n_prompts(), env.responses_per_prompt());

    let config = PpoConfig {
        steps: 600,
        seed: 3,
        ..PpoConfig::default()
    };
    let (aligned, curves) = align(&reference, &env, &rewards, &config)?;

    let deciles = config.steps / 10;
    println!(
        "mean total reward: first decile {:+.4}, last decile {:+.4}",
        curves.mean_total_reward_over(0..deciles),
        curves.mean_total_reward_over(config.steps - deciles..config.steps)
    );
    println!(
        "final mean KL to reference: {:.4}",
        curves.final_kl().unwrap_or(f64::NAN)
    );

    println!(
        "mean ground-truth reward: {:+.4} -> {:+.4}",
        policy_mean_reward(&reference, &env, &schema)?,
        policy_mean_reward(&aligned, &env, &schema)?
    );
    println!(
        "mean ideal-distance:      {:+.4} -> {:+.4}",
        policy_mean_ideal_distance(&reference, &env, &schema)?,
        policy_mean_ideal_distance(&aligned, &env, &schema)?
    );

    let rate = win_rate(&aligned, &reference, &env, 5000, 9, &schema)?;
    println!("aligned vs reference win rate (n = 5000): {rate:.4}");
    Ok(())
}
