//! Operator surface.
//!
//! Five subcommands: `gen-data`, `train`, `eval`, `align`, `verify`.
//! Options resolve in three layers — built-in defaults, then a flat
//! `key = value` config file (`--config`), then command-line flags — and
//! the effective configuration is echoed to `<out>/config.json` for
//! provenance. Unknown config keys are rejected. All file outputs are
//! written atomically (temp file + rename), so interrupted runs never
//! leave half-written artifacts.
//!
//! Exit codes: 0 success, 1 verification failure, 2 user/config error,
//! 3 external-client failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::align::{
    align, head_reward_table, truth_reward_table, win_rate, Policy, PpoConfig, RewardSource,
    SyntheticEnv,
};
use crate::annotate::remote::{DEFAULT_TIMEOUT, REMOTE_URL_ENV};
use crate::annotate::{
    default_panel, generate_dataset, AnnotatorClient, DatasetSpec, RemoteJson, SyntheticSampler,
};
use crate::dprm::{
    evaluate, records_from_jsonl, records_to_jsonl, train, Checkpoint, DistHead, Featurizer,
    FeaturizerConfig, LossKind, TrainConfig, DEFAULT_FEATURE_DIM,
};
use crate::error::Error;
use crate::preference::CategorySchema;
use crate::verify::{check_names, run_all, VerifyOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USER_ERROR: u8 = 2;
pub const EXIT_CLIENT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dprm-lab",
    version,
    about = "Distributional preference reward modelling toolkit"
)]
struct Cli {
    /// Master seed; every stage derives its streams from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Category schema JSON (defaults to the built-in six-category table).
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key = value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a preference-distribution dataset with synthetic or remote annotators.
    GenData(GenDataArgs),
    /// Train the distributional head on a JSONL dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint against a JSONL dataset.
    Eval(EvalArgs),
    /// PPO-align a tabular policy on a synthetic environment.
    Align(AlignArgs),
    /// Run the property suite and write a machine-readable report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Number of chosen/rejected pairs (two records each).
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    helpfulness_fraction: Option<f64>,
    #[arg(long)]
    prior_panel: Option<usize>,
    #[arg(long)]
    posterior_labels: Option<usize>,
    /// Targeted-smoothing strength applied to fully certain posteriors.
    #[arg(long)]
    alpha: Option<f64>,
    /// Annotator backend: synthetic | remote.
    #[arg(long)]
    client: Option<String>,
    /// Remote annotator endpoint (defaults to $DPRM_LAB_REMOTE_URL).
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Input dataset (JSONL).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Loss kind: ce | w | ot.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    sinkhorn_eps: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long)]
    prompts: Option<usize>,
    #[arg(long)]
    responses_per_prompt: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Reward source: truth_oracle | dprm_head.
    #[arg(long)]
    reward: Option<String>,
    /// Checkpoint path, required with --reward dprm_head.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Samples for the final aligned-vs-reference win-rate estimate.
    #[arg(long)]
    win_rate_n: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Print check names without running anything.
    #[arg(long)]
    list: bool,
    /// Break the cost matrix to prove the equivalence check fails.
    #[arg(long)]
    inject_fault: bool,
}

/// Parse argv (without the binary name) and run. Returns the process exit code.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut argv: Vec<String> = vec!["dprm-lab".into()];
    argv.extend(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USER_ERROR,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::ClientFailure { .. } => EXIT_CLIENT_ERROR,
        _ => EXIT_USER_ERROR,
    }
}

/// Layered option resolution with provenance echo. Values enter as strings
/// (config file) or typed flags; everything lands in the echo map.
struct Resolved {
    file: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Resolved {
    fn new(config_path: Option<&Path>, sub_keys: &[&str]) -> crate::Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("expected key = value, got {line:?}"),
                    });
                };
                let key = key.trim().to_string();
                if !GLOBAL_KEYS.contains(&key.as_str()) && !sub_keys.contains(&key.as_str()) {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("unknown config key {key:?}"),
                    });
                }
                file.insert(key, value.trim().to_string());
            }
        }
        Ok(Self {
            file,
            echo: BTreeMap::new(),
        })
    }

    /// flag > config file > default; records the winner in the echo map.
    fn get<T: std::str::FromStr + ToString>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> crate::Result<T> {
        let value = if let Some(v) = flag {
            v
        } else if let Some(raw) = self.file.get(key) {
            raw.parse::<T>().map_err(|_| {
                Error::InvalidParameter(format!("config key {key:?} has unusable value {raw:?}"))
            })?
        } else {
            default
        };
        self.echo.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    fn get_opt_path(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        let value = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.display().to_string());
        }
        value
    }

    fn get_opt_string(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let value = flag.or_else(|| self.file.get(key).cloned());
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), v.clone());
        }
        value
    }

    /// Record a value that was resolved outside the flag/file layers
    /// (e.g. an environment variable).
    fn note(&mut self, key: &str, value: &str) {
        self.echo.insert(key.to_string(), value.to_string());
    }
}

const GLOBAL_KEYS: &[&str] = &["seed", "schema", "out"];

fn dispatch(cli: Cli) -> crate::Result<u8> {
    let sub_keys: &[&str] = match &cli.command {
        Command::GenData(_) => &[
            "pairs",
            "helpfulness_fraction",
            "prior_panel",
            "posterior_labels",
            "alpha",
            "client",
            "url",
            "timeout_secs",
        ],
        Command::Train(_) => &[
            "data",
            "loss",
            "epochs",
            "lr_start",
            "lr_end",
            "batch_size",
            "sinkhorn_eps",
            "feature_dim",
        ],
        Command::Eval(_) => &["data", "checkpoint"],
        Command::Align(_) => &[
            "prompts",
            "responses_per_prompt",
            "steps",
            "batch",
            "clip",
            "beta",
            "lr",
            "reward",
            "checkpoint",
            "win_rate_n",
        ],
        Command::Verify(_) => &["inject_fault"],
    };
    let mut resolved = Resolved::new(cli.config.as_deref(), sub_keys)?;

    let seed = resolved.get("seed", cli.seed, 0u64)?;
    let schema = match resolved.get_opt_path("schema", cli.schema) {
        Some(path) => CategorySchema::from_json(&std::fs::read_to_string(path)?)?,
        None => CategorySchema::default_six(),
    };
    let out = resolved
        .get_opt_path("out", cli.out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let listing_only = matches!(&cli.command, Command::Verify(v) if v.list);
    if !listing_only {
        std::fs::create_dir_all(&out)?;
    }

    match cli.command {
        Command::GenData(args) => cmd_gen_data(args, seed, &schema, &out, resolved),
        Command::Train(args) => cmd_train(args, seed, &schema, &out, resolved),
        Command::Eval(args) => cmd_eval(args, seed, &schema, &out, resolved),
        Command::Align(args) => cmd_align(args, seed, &schema, &out, resolved),
        Command::Verify(args) => cmd_verify(args, seed, &out, resolved),
    }
}

fn write_atomic(path: &Path, contents: &str) -> crate::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn echo_config(out: &Path, subcommand: &str, resolved: &Resolved) -> crate::Result<()> {
    let mut map = resolved.echo.clone();
    map.insert("subcommand".into(), subcommand.into());
    write_atomic(
        &out.join("config.json"),
        &serde_json::to_string_pretty(&map)?,
    )
}

fn cmd_gen_data(
    args: GenDataArgs,
    seed: u64,
    schema: &CategorySchema,
    out: &Path,
    mut resolved: Resolved,
) -> crate::Result<u8> {
    let spec = DatasetSpec {
        n_pairs: resolved.get("pairs", args.pairs, 1000)?,
        helpfulness_fraction: resolved.get(
            "helpfulness_fraction",
            args.helpfulness_fraction,
            2.0 / 3.0,
        )?,
        panel: default_panel(),
        prior_panel_size: resolved.get("prior_panel", args.prior_panel, 7)?,
        posterior_labels_per_record: resolved.get("posterior_labels", args.posterior_labels, 7)?,
        alpha_smooth: resolved.get(
            "alpha",
            args.alpha,
            crate::preference::DEFAULT_SMOOTHING_ALPHA,
        )?,
    };
    spec.validate()?;
    let client_kind = resolved.get("client", args.client, "synthetic".to_string())?;
    let mut client: Box<dyn AnnotatorClient> = match client_kind.as_str() {
        "synthetic" => Box::new(SyntheticSampler::new(schema.clone(), seed)),
        "remote" => {
            let url = match resolved.get_opt_string("url", args.url) {
                Some(u) => u,
                None => {
                    let from_env = std::env::var(REMOTE_URL_ENV).map_err(|_| {
                        Error::InvalidParameter(format!(
                            "remote client needs --url or ${REMOTE_URL_ENV}"
                        ))
                    })?;
                    resolved.note("url", &from_env);
                    from_env
                }
            };
            let timeout =
                resolved.get("timeout_secs", args.timeout_secs, DEFAULT_TIMEOUT.as_secs())?;
            Box::new(RemoteJson::new(
                &url,
                Duration::from_secs(timeout),
                schema.len(),
            )?)
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown client {other:?} (expected synthetic or remote)"
            )))
        }
    };
    echo_config(out, "gen-data", &resolved)?;

    match generate_dataset(&spec, client.as_mut(), seed, schema) {
        Ok((records, manifest)) => {
            write_atomic(&out.join("dataset.jsonl"), &records_to_jsonl(&records)?)?;
            write_atomic(
                &out.join("manifest.json"),
                &serde_json::to_string_pretty(&manifest)?,
            )?;
            println!(
                "wrote {} records ({} smoothed, {} inconsistent pairs) to {}",
                manifest.records,
                manifest.smoothed_records,
                manifest.inconsistent_pairs,
                out.join("dataset.jsonl").display()
            );
            Ok(EXIT_OK)
        }
        Err(Error::ClientFailure {
            message,
            completed_pairs,
        }) => {
            // Abort with a partial-output manifest; no dataset file.
            let partial = serde_json::json!({
                "status": "aborted",
                "error": message,
                "pairs_completed": completed_pairs,
                "seed": seed,
            });
            write_atomic(
                &out.join("manifest.json"),
                &serde_json::to_string_pretty(&partial)?,
            )?;
            Err(Error::ClientFailure {
                message,
                completed_pairs,
            })
        }
        Err(other) => Err(other),
    }
}

fn load_records(path: &Path) -> crate::Result<Vec<crate::dprm::PreferenceRecord>> {
    records_from_jsonl(&std::fs::read_to_string(path)?)
}

fn cmd_train(
    args: TrainArgs,
    seed: u64,
    schema: &CategorySchema,
    out: &Path,
    mut resolved: Resolved,
) -> crate::Result<u8> {
    let data = resolved
        .get_opt_path("data", args.data)
        .ok_or_else(|| Error::InvalidParameter("train needs --data <jsonl>".into()))?;
    let loss: LossKind = resolved.get("loss", args.loss, "ot".to_string())?.parse()?;
    let config = TrainConfig {
        epochs: resolved.get("epochs", args.epochs, 20)?,
        lr_start: resolved.get("lr_start", args.lr_start, 2e-5)?,
        lr_end: resolved.get("lr_end", args.lr_end, 2e-7)?,
        batch_size: resolved.get("batch_size", args.batch_size, 12)?,
        loss_kind: loss,
        sinkhorn_eps: resolved.get("sinkhorn_eps", args.sinkhorn_eps, 0.05)?,
        seed,
    };
    let feature_dim = resolved.get("feature_dim", args.feature_dim, DEFAULT_FEATURE_DIM)?;
    echo_config(out, "train", &resolved)?;

    let records = load_records(&data)?;
    let featurizer = Featurizer::new(FeaturizerConfig {
        dim: feature_dim,
        seed,
    })?;
    let head = DistHead::zeros(featurizer.dim(), schema.len());
    let (best, curve) = train(&head, &records, &featurizer, schema, &config)?;

    let checkpoint = Checkpoint::from_head(&best, featurizer.config(), seed);
    write_atomic(&out.join("checkpoint.json"), &checkpoint.to_json()?)?;
    write_atomic(&out.join("metrics.csv"), &curve.to_csv())?;
    println!(
        "best checkpoint at epoch {} (held-out {} loss {:.6}); metrics at {}",
        curve.best_epoch,
        loss,
        curve.heldout_loss(curve.best_epoch).unwrap_or(f64::NAN),
        out.join("metrics.csv").display()
    );
    Ok(EXIT_OK)
}

fn cmd_eval(
    args: EvalArgs,
    _seed: u64,
    schema: &CategorySchema,
    out: &Path,
    mut resolved: Resolved,
) -> crate::Result<u8> {
    let data = resolved
        .get_opt_path("data", args.data)
        .ok_or_else(|| Error::InvalidParameter("eval needs --data <jsonl>".into()))?;
    let checkpoint_path = resolved
        .get_opt_path("checkpoint", args.checkpoint)
        .ok_or_else(|| Error::InvalidParameter("eval needs --checkpoint <json>".into()))?;
    echo_config(out, "eval", &resolved)?;

    let checkpoint = Checkpoint::from_json(&std::fs::read_to_string(checkpoint_path)?)?;
    let featurizer = Featurizer::new(checkpoint.featurizer)?;
    let head = checkpoint.head()?;
    let records = load_records(&data)?;
    let metrics = evaluate(&head, &records, &featurizer, schema)?;
    write_atomic(
        &out.join("eval.json"),
        &serde_json::to_string_pretty(&metrics)?,
    )?;
    println!(
        "evaluated {} records: mean W1 {:.6}, mean CE {:.6}, reward MAE {:.6}",
        metrics.n, metrics.mean_w1, metrics.mean_ce, metrics.reward_mae
    );
    Ok(EXIT_OK)
}

fn cmd_align(
    args: AlignArgs,
    seed: u64,
    schema: &CategorySchema,
    out: &Path,
    mut resolved: Resolved,
) -> crate::Result<u8> {
    let n_prompts = resolved.get("prompts", args.prompts, 16)?;
    let responses_per_prompt =
        resolved.get("responses_per_prompt", args.responses_per_prompt, 4)?;
    let reward_source: RewardSource = resolved
        .get("reward", args.reward, "truth_oracle".to_string())?
        .parse()?;
    let config = PpoConfig {
        steps: resolved.get("steps", args.steps, 600)?,
        batch: resolved.get("batch", args.batch, 64)?,
        clip: resolved.get("clip", args.clip, 0.2)?,
        beta: resolved.get("beta", args.beta, 0.1)?,
        lr: resolved.get("lr", args.lr, 0.05)?,
        seed,
        reward_source,
    };
    config.validate()?;
    let win_n = resolved.get("win_rate_n", args.win_rate_n, 5000)?;
    let checkpoint_path = resolved.get_opt_path("checkpoint", args.checkpoint);
    echo_config(out, "align", &resolved)?;

    let env = SyntheticEnv::generate(
        n_prompts,
        responses_per_prompt,
        &default_panel(),
        seed,
        schema,
    )?;
    let rewards = match reward_source {
        RewardSource::TruthOracle => truth_reward_table(&env, schema)?,
        RewardSource::DprmHead => {
            let path = checkpoint_path.ok_or_else(|| {
                Error::InvalidParameter("--reward dprm_head needs --checkpoint <json>".into())
            })?;
            let checkpoint = Checkpoint::from_json(&std::fs::read_to_string(path)?)?;
            let featurizer = Featurizer::new(checkpoint.featurizer)?;
            head_reward_table(&env, &checkpoint.head()?, &featurizer, schema)?
        }
    };

    let reference = Policy::uniform(env.n_prompts(), env.responses_per_prompt());
    let (aligned, curves) = align(&reference, &env, &rewards, &config)?;
    let rate = win_rate(&aligned, &reference, &env, win_n, seed, schema)?;

    write_atomic(&out.join("curves.csv"), &curves.to_csv())?;
    write_atomic(
        &out.join("policy.json"),
        &serde_json::to_string_pretty(&aligned)?,
    )?;
    let report = serde_json::json!({
        "aligned_vs_reference": rate,
        "samples": win_n,
        "final_mean_kl": curves.final_kl(),
        "steps": config.steps,
    });
    write_atomic(
        &out.join("win_rate.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "aligned {} prompts for {} steps: win rate vs reference {:.4}, final mean KL {:.6}",
        env.n_prompts(),
        config.steps,
        rate,
        curves.final_kl().unwrap_or(f64::NAN)
    );
    Ok(EXIT_OK)
}

fn cmd_verify(
    args: VerifyArgs,
    seed: u64,
    out: &Path,
    mut resolved: Resolved,
) -> crate::Result<u8> {
    if args.list {
        for name in check_names() {
            println!("{name}");
        }
        return Ok(EXIT_OK);
    }
    // The flag only participates when actually given, so a config-file
    // `inject_fault = true` is not silently overridden.
    let inject_fault = resolved.get("inject_fault", args.inject_fault.then_some(true), false)?;
    echo_config(out, "verify", &resolved)?;

    let report = run_all(&VerifyOptions { seed, inject_fault });
    for check in &report.checks {
        println!(
            "{} {} (residual {:.3e})",
            if check.passed() { "PASS" } else { "FAIL" },
            check.check,
            check.residual
        );
    }
    write_atomic(&out.join("verify_report.json"), &report.to_json()?)?;
    println!(
        "{} passed, {} failed; report at {}",
        report.passed,
        report.failed,
        out.join("verify_report.json").display()
    );
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
