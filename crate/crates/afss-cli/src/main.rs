//! `afss`: synthesize pseudo-fakes, train the detector, evaluate, score,
//! and validate manifests. Exit codes: 0 success, 1 validation problem,
//! 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use afss_core::commands::{
    cmd_evaluate, cmd_score, cmd_synthesize, cmd_train, cmd_validate,
};
use afss_core::config::{ExperimentConfig, CONFIG_ENV_VAR};
use afss_core::Error;

#[derive(Parser)]
#[command(
    name = "afss",
    version,
    about = "Anti-spoofing by self-synthesis: pseudo-fake generation, detector training, evaluation"
)]
struct Cli {
    /// Experiment config (TOML). Defaults to $AFSS_CONFIG, then built-ins.
    #[arg(long, global = true, env = CONFIG_ENV_VAR)]
    config: Option<PathBuf>,

    /// Root seed override; one value controls the whole pipeline.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory override.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate pseudo-fakes from a real-only manifest and write the merged
    /// training manifest.
    Synthesize {
        /// Manifest of real utterances (or paths.real_manifest from config).
        #[arg(long)]
        real_manifest: Option<PathBuf>,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the detector in the run directory, resuming from its last
    /// checkpoint when one exists.
    Train {
        /// Merged training manifest (or paths.train_manifest from config).
        #[arg(long)]
        train_manifest: Option<PathBuf>,
        /// Dev manifest for early stopping (or paths.dev_manifest).
        #[arg(long)]
        dev_manifest: Option<PathBuf>,
        /// Replace a differing config snapshot and restart from scratch.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a checkpoint on one or more manifests; emits one summary
    /// per dataset plus an unweighted average row.
    Evaluate {
        /// Eval manifests (or paths.eval_manifests from config).
        manifests: Vec<PathBuf>,
        /// Checkpoint to evaluate (default: run dir's best checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Where scores/ and evaluation.json land (default: run dir).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a plain score file for a manifest (no metrics computed).
    Score {
        manifest: PathBuf,
        /// Checkpoint to score with (default: run dir's best checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Score file path (default: <run dir>/scores/<manifest stem>.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a manifest: column arity, labels, duplicate ids, audio files,
    /// sample rates. Prints one line per problem.
    Validate { manifest: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(run_dir) = &cli.run_dir {
        cfg.paths.run_dir = run_dir.clone();
    }
    let run_dir = cfg.paths.run_dir.clone();

    match cli.cmd {
        Cmd::Synthesize {
            real_manifest,
            out_dir,
        } => {
            let real = required(
                real_manifest.or_else(|| cfg.paths.real_manifest.clone()),
                "no real manifest: pass --real-manifest or set paths.real_manifest",
            )?;
            let out = out_dir.unwrap_or_else(|| run_dir.clone());
            let o = cmd_synthesize(&cfg, &real, &out)?;
            println!("synthesized {} fakes from {} reals", o.n_fake, o.n_real);
            for (provenance, n) in &o.counts {
                println!("  {provenance}: {n}");
            }
            if !o.skipped.is_empty() {
                println!("  skipped: {}", o.skipped.len());
            }
            println!("fake manifest:   {}", o.fake_manifest.display());
            println!("merged manifest: {}", o.merged_manifest.display());
        }
        Cmd::Train {
            train_manifest,
            dev_manifest,
            force,
        } => {
            let train = required(
                train_manifest.or_else(|| cfg.paths.train_manifest.clone()),
                "no training manifest: pass --train-manifest or set paths.train_manifest",
            )?;
            let dev = required(
                dev_manifest.or_else(|| cfg.paths.dev_manifest.clone()),
                "no dev manifest: pass --dev-manifest or set paths.dev_manifest",
            )?;
            let o = cmd_train(&cfg, &train, &dev, &run_dir, force)?;
            let last = o.history.last();
            println!(
                "trained {} epoch(s){}; best dev EER {:.4} at epoch {}",
                o.epochs_run,
                if o.stopped_early { " (early stop)" } else { "" },
                o.best.best_dev_eer,
                o.best.epoch
            );
            if let Some(s) = last {
                println!(
                    "final epoch {}: train loss {:.6}, dev EER {:.4}, w_fake {:.4}, w_real {:.4}",
                    s.epoch, s.train_loss, s.dev_eer, s.w_fake, s.w_real
                );
            }
            println!("best checkpoint: {}", o.best_path.display());
            println!("history:         {}", o.history_path.display());
        }
        Cmd::Evaluate {
            manifests,
            checkpoint,
            out_dir,
        } => {
            let manifests = if manifests.is_empty() {
                cfg.paths.eval_manifests.clone()
            } else {
                manifests
            };
            let ckpt = checkpoint
                .unwrap_or_else(|| run_dir.join("checkpoints").join("best.json"));
            let out = out_dir.unwrap_or_else(|| run_dir.clone());
            // Cross-check the architecture only when a config was given.
            let cfg_ref = cli.config.as_ref().map(|_| &cfg);
            let o = cmd_evaluate(cfg_ref, &ckpt, &manifests, &out)?;
            for row in &o.rows {
                println!(
                    "{}: eer {:.4}  auc {:.4}  acc {:.4}  ap {:.4}  ({} real / {} fake)",
                    row.name,
                    row.summary.eer,
                    row.summary.auc,
                    row.summary.acc,
                    row.summary.ap,
                    row.summary.n_real,
                    row.summary.n_fake
                );
            }
            println!(
                "average: eer {:.4}  auc {:.4}  acc {:.4}  ap {:.4}",
                o.average.eer, o.average.auc, o.average.acc, o.average.ap
            );
            println!("wrote {}", o.evaluation_path.display());
        }
        Cmd::Score {
            manifest,
            checkpoint,
            out,
        } => {
            let ckpt = checkpoint
                .unwrap_or_else(|| run_dir.join("checkpoints").join("best.json"));
            let out = out.unwrap_or_else(|| {
                let stem = manifest
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scores".into());
                run_dir.join("scores").join(format!("{stem}.txt"))
            });
            let o = cmd_score(&ckpt, &manifest, &out)?;
            println!("wrote {} score(s) to {}", o.n_scored, o.score_path.display());
            for (utt, reason) in &o.failures {
                eprintln!("  failed: {utt}: {reason}");
            }
        }
        Cmd::Validate { manifest } => {
            let problems = cmd_validate(&manifest)?;
            if problems.is_empty() {
                println!("{}: OK", manifest.display());
            } else {
                for p in &problems {
                    println!("{p}");
                }
                return Err(Error::ManifestValidation {
                    report: format!("{} problem(s) found", problems.len()),
                });
            }
        }
    }
    Ok(())
}

fn required(value: Option<PathBuf>, message: &str) -> Result<PathBuf, Error> {
    value.ok_or_else(|| Error::Config(message.to_string()))
}
