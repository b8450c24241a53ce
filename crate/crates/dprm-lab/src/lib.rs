//! Distributional preference reward modelling at desk scale.
//!
//! Crowd feedback on a prompt-response pair is a distribution over six
//! helpfulness/harmlessness categories, each carrying a scalar reward.
//! This crate models those distributions, trains a reward head to predict
//! them with optimal-transport losses, collapses predictions to scalar
//! rewards, and fine-tunes a policy against a synthetic annotator
//! population — with an executable property suite covering the claims the
//! pipeline rests on.
//!
//! ## Modules
//!
//! | Module | What it does |
//! |--------|--------------|
//! | [`preference`] | Category schema, one-hot and group preferences, Bayesian updates, targeted and uniform smoothing |
//! | [`transport`] | Exact transport LP, log-domain Sinkhorn, Wasserstein distances, 1-D closed-form oracle, transport gradients |
//! | [`dprm`] | Hashed-text featurizer, distributional head, CE/W/OT losses, training loop, evaluation |
//! | [`reward`] | Expected reward, KL divergence, total-reward signal, distance to the ideal verdict |
//! | [`align`] | Synthetic environment, tabular policy, clipped-PPO bandit loop, win rates |
//! | [`annotate`] | Persona panel, synthetic/remote annotator clients, three-step dataset construction |
//! | [`verify`] | The named property checks and their machine-readable report |
//! | [`cli`] | The `dprm-lab` binary: `gen-data`, `train`, `eval`, `align`, `verify` |
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p dprm-lab --example preference_smoothing   # aggregation + smoothing bias
//! cargo run -p dprm-lab --example transport_basics      # plans, duals, Sinkhorn vs exact
//! cargo run -p dprm-lab --example generate_dataset      # persona panel -> JSONL corpus
//! cargo run -p dprm-lab --example train_reward_model    # CE vs OT training comparison
//! cargo run -p dprm-lab --example align_policy          # PPO against the population oracle
//! cargo run -p dprm-lab --example verify_report         # the full property suite
//! ```
//!
//! The same flows are scriptable through the thin `dprm-lab` binary; see
//! the README for the subcommand reference.

pub mod align;
pub mod annotate;
pub mod cli;
pub mod dprm;
pub mod error;
pub mod preference;
pub mod reward;
pub mod rng;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
