//! The training harness: reweighted BCE with learnable class weights,
//! balanced batches, AdamW under a warmup/decay schedule in three parameter
//! groups, early stopping on dev EER, and resumable checkpoints.

mod checkpoint;
mod loss;
mod optimizer;
mod sampler;
mod schedule;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TensorData, CHECKPOINT_VERSION,
};
pub use loss::{d_loss_d_logit, reweighted_bce, LossTerms, ReweightingLossState, LOSS_EPS};
pub use optimizer::AdamW;
pub use sampler::{balanced_batches, batches_per_epoch};
pub use schedule::lr_at;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, resample, PIPELINE_RATE};
use crate::detector::{DetectorModel, DetectorSpec, FrontEndImpl, ParamViewMut, ParameterGroups};
use crate::error::{Error, Result};
use crate::manifest::{read_manifest, resolve_audio_path, Label};
use crate::metrics::{eer, ScoreEntry, ScoreSet};
use crate::rng::RngStream;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_front: f64,
    pub lr_head: f64,
    /// Learning rate for the two loss parameters. The ablation winner 1e-6
    /// is the default; the alternative 1e-4 stays one config edit away.
    pub lr_loss: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub warmup_epochs: usize,
    pub final_lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub freeze_front: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_front: 5e-6,
            lr_head: 1e-4,
            lr_loss: 1e-6,
            weight_decay: 1e-4,
            max_epochs: 30,
            warmup_epochs: 5,
            final_lr: 1e-6,
            batch_size: 12,
            patience: 10,
            seed: 7,
            freeze_front: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return Err(Error::Config(format!(
                "batch_size must be even and positive, got {}",
                self.batch_size
            )));
        }
        if self.warmup_epochs >= self.max_epochs {
            return Err(Error::Config(format!(
                "warmup_epochs ({}) must be below max_epochs ({})",
                self.warmup_epochs, self.max_epochs
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        for (name, lr) in [
            ("lr_front", self.lr_front),
            ("lr_head", self.lr_head),
            ("lr_loss", self.lr_loss),
            ("final_lr", self.final_lr),
            ("weight_decay", self.weight_decay),
        ] {
            if !lr.is_finite() || lr < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {lr}")));
            }
        }
        Ok(())
    }
}

/// Model plus loss parameters: everything the optimizer touches.
pub struct TrainState {
    pub model: DetectorModel,
    pub loss: ReweightingLossState,
}

impl TrainState {
    pub fn new(model: DetectorModel) -> Self {
        TrainState {
            model,
            loss: ReweightingLossState::default(),
        }
    }

    /// Model groups with the loss group populated.
    pub fn parameter_groups(&self) -> ParameterGroups {
        let mut groups = self.model.parameter_groups();
        groups.loss = vec!["loss.w_tilde_fake".into(), "loss.w_tilde_real".into()];
        groups
    }

    /// Every trainable parameter as named mutable views, loss included.
    pub fn params_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let TrainState { model, loss } = self;
        let mut views = model.params_mut();
        views.push(ParamViewMut {
            name: "loss.w_tilde_fake".into(),
            data: std::slice::from_mut(&mut loss.w_tilde_fake),
            grad: std::slice::from_mut(&mut loss.grad_w_tilde_fake),
            shape: vec![1],
        });
        views.push(ParamViewMut {
            name: "loss.w_tilde_real".into(),
            data: std::slice::from_mut(&mut loss.w_tilde_real),
            grad: std::slice::from_mut(&mut loss.grad_w_tilde_real),
            shape: vec![1],
        });
        views
    }

    pub fn zero_grad(&mut self) {
        self.model.zero_grad();
        self.loss.zero_grad();
    }
}

/// One line of the history log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_eer: f64,
    pub w_fake: f64,
    pub w_real: f64,
}

/// What a completed (or early-stopped) training call returns.
#[derive(Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub history: Vec<EpochStats>,
    /// Epochs executed by this call (0 if the run was already finished).
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub best_path: PathBuf,
    pub last_path: PathBuf,
    pub history_path: PathBuf,
}

struct Item {
    utt: String,
    label: Label,
    feats: Array2<f64>,
}

fn load_items(manifest_path: &Path, model: &DetectorModel) -> Result<Vec<Item>> {
    let front = match model.front() {
        FrontEndImpl::Toy(t) => t,
        FrontEndImpl::External(_) => {
            return Err(Error::Config(
                "training requires the in-process toy front end".into(),
            ))
        }
    };
    let records = read_manifest(manifest_path)?;
    records
        .par_iter()
        .map(|r| {
            let path = resolve_audio_path(manifest_path, r);
            let w = load_wav(&path)?;
            let w = if w.sample_rate() == PIPELINE_RATE {
                w
            } else {
                resample(&w, PIPELINE_RATE)?
            };
            let feats = front.features(&w)?;
            Ok(Item {
                utt: r.utterance_id.clone(),
                label: r.label,
                feats,
            })
        })
        .collect()
}

fn dev_eer_of(state: &TrainState, dev: &[Item]) -> Result<f64> {
    let entries = dev
        .par_iter()
        .map(|item| {
            let (_, p) = state.model.eval_from_features(&item.feats)?;
            Ok(ScoreEntry {
                utterance_id: item.utt.clone(),
                label: item.label,
                score: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (e, _) = eer(&ScoreSet::new(entries)?)?;
    Ok(e)
}

/// Train to completion (or early stop), auto-resuming from
/// `run_dir/checkpoints/last.json` when present.
pub fn train(
    spec: &DetectorSpec,
    train_manifest: &Path,
    dev_manifest: &Path,
    cfg: &TrainConfig,
    run_dir: &Path,
) -> Result<TrainOutcome> {
    train_limited(spec, train_manifest, dev_manifest, cfg, run_dir, None)
}

/// Like [`train`], but stops after at most `epoch_limit` epochs in this
/// call; a later call resumes bit-exactly where this one left off. `None`
/// runs to completion.
pub fn train_limited(
    spec: &DetectorSpec,
    train_manifest: &Path,
    dev_manifest: &Path,
    cfg: &TrainConfig,
    run_dir: &Path,
    epoch_limit: Option<usize>,
) -> Result<TrainOutcome> {
    cfg.validate()?;

    let ckpt_dir = run_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let best_path = ckpt_dir.join("best.json");
    let last_path = ckpt_dir.join("last.json");
    let history_path = run_dir.join("history.jsonl");

    // Resume or fresh start.
    let resumed = last_path.exists();
    let (mut state, mut optimizer, mut start_epoch, mut global_step, mut best_eer, mut since_improve) =
        if resumed {
            let ckpt = load_checkpoint(&last_path)?;
            if ckpt.config != *cfg {
                return Err(Error::Checkpoint(format!(
                    "{} was written under a different training config; \
                     refusing to resume",
                    last_path.display()
                )));
            }
            if ckpt.detector != *spec {
                return Err(Error::Checkpoint(format!(
                    "{} was written for a different detector architecture",
                    last_path.display()
                )));
            }
            let mut model = ckpt.restore_model()?;
            model.set_front_frozen(cfg.freeze_front);
            let mut st = TrainState::new(model);
            st.loss = ckpt.loss;
            (
                st,
                ckpt.optimizer.clone(),
                ckpt.epoch,
                ckpt.global_step,
                ckpt.best_dev_eer,
                ckpt.epochs_since_improve,
            )
        } else {
            let mut model = spec.build(cfg.seed)?;
            model.set_front_frozen(cfg.freeze_front);
            (
                TrainState::new(model),
                AdamW::new(cfg.weight_decay),
                0,
                0,
                f64::INFINITY,
                0,
            )
        };

    let mut history = load_truncated_history(&history_path, start_epoch)?;

    let train_items = load_items(train_manifest, &state.model)?;
    let dev_items = load_items(dev_manifest, &state.model)?;
    if dev_items.iter().all(|i| i.label == Label::Real)
        || dev_items.iter().all(|i| i.label == Label::Fake)
    {
        return Err(Error::Config(
            "dev manifest must contain both classes for EER-based early stopping".into(),
        ));
    }

    let labels: Vec<Label> = train_items.iter().map(|i| i.label).collect();
    let n_real = labels.iter().filter(|&&l| l == Label::Real).count();
    let n_fake = labels.len() - n_real;
    let steps_per_epoch = batches_per_epoch(n_real, n_fake, cfg.batch_size);
    if steps_per_epoch == 0 {
        return Err(Error::Config(format!(
            "not enough samples for one balanced batch: {n_real} real / {n_fake} fake \
             at batch size {}",
            cfg.batch_size
        )));
    }
    let total_steps = cfg.max_epochs * steps_per_epoch;
    let warmup_steps = cfg.warmup_epochs * steps_per_epoch;

    let groups = state.parameter_groups();
    let group_of: BTreeMap<String, f64> = groups
        .front
        .iter()
        .map(|n| (n.clone(), cfg.lr_front))
        .chain(groups.head.iter().map(|n| (n.clone(), cfg.lr_head)))
        .chain(groups.loss.iter().map(|n| (n.clone(), cfg.lr_loss)))
        .collect();
    let front_frozen = state.model.front_frozen();

    let mut history_file = open_history(&history_path, start_epoch)?;
    let detector_spec = spec.clone();
    let mut epochs_run = 0usize;
    let mut stopped_early = since_improve >= cfg.patience;

    while start_epoch < cfg.max_epochs && !stopped_early {
        if let Some(limit) = epoch_limit {
            if epochs_run >= limit {
                break;
            }
        }
        let epoch = start_epoch + 1;

        let mut sampler_rng = RngStream::for_epoch(cfg.seed, epoch, "sampler");
        let batches = balanced_batches(&labels, cfg.batch_size, &mut sampler_rng)?;
        let mut loss_sum = 0.0;

        for (batch_idx, batch) in batches.iter().enumerate() {
            state.zero_grad();
            let mut batch_loss = 0.0;
            let inv_bs = 1.0 / batch.len() as f64;
            for &i in batch {
                let item = &train_items[i];
                let mut drop_rng =
                    RngStream::for_sample(cfg.seed, &item.utt, &format!("dropout-e{epoch}"));
                let (_, p, cache) = state
                    .model
                    .forward_features_train(&item.feats, &mut drop_rng)?;
                let y = match item.label {
                    Label::Fake => 1,
                    Label::Real => 0,
                };
                let terms = reweighted_bce(y, p, &state.loss);
                batch_loss += terms.loss * inv_bs;
                state.model.backward(&cache, d_loss_d_logit(&terms, p) * inv_bs);
                state.loss.grad_w_tilde_fake += terms.d_w_tilde_fake * inv_bs;
                state.loss.grad_w_tilde_real += terms.d_w_tilde_real * inv_bs;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    utterances: batch.iter().map(|&i| train_items[i].utt.clone()).collect(),
                });
            }
            loss_sum += batch_loss;

            global_step += 1;
            let mut params = state.params_mut();
            optimizer.step(&mut params, |name| {
                if front_frozen && name.starts_with("front.") {
                    return None;
                }
                let peak = *group_of.get(name)?;
                Some(lr_at(global_step, total_steps, warmup_steps, peak, cfg.final_lr))
            });
        }

        let train_loss = loss_sum / batches.len() as f64;
        let dev_eer = dev_eer_of(&state, &dev_items)?;
        let stats = EpochStats {
            epoch,
            train_loss,
            dev_eer,
            w_fake: state.loss.w_fake(),
            w_real: state.loss.w_real(),
        };
        append_history(&mut history_file, &stats)?;
        history.push(stats);

        if dev_eer < best_eer {
            best_eer = dev_eer;
            since_improve = 0;
            let best = Checkpoint::capture(
                &state.model,
                &state.loss,
                &optimizer,
                cfg,
                &detector_spec,
                epoch,
                global_step,
                best_eer,
                since_improve,
            );
            save_checkpoint(&best_path, &best)?;
        } else {
            since_improve += 1;
        }

        let last = Checkpoint::capture(
            &state.model,
            &state.loss,
            &optimizer,
            cfg,
            &detector_spec,
            epoch,
            global_step,
            best_eer,
            since_improve,
        );
        save_checkpoint(&last_path, &last)?;

        start_epoch = epoch;
        epochs_run += 1;
        if since_improve >= cfg.patience {
            stopped_early = true;
        }
    }

    let best = load_checkpoint(&best_path).map_err(|e| {
        Error::Checkpoint(format!(
            "no best checkpoint was produced (did any epoch run?): {e}"
        ))
    })?;
    Ok(TrainOutcome {
        best,
        history,
        epochs_run,
        stopped_early,
        best_path,
        last_path,
        history_path,
    })
}

/// History lines for epochs ≤ `upto`, in order.
fn load_truncated_history(path: &Path, upto: usize) -> Result<Vec<EpochStats>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let stats: EpochStats = serde_json::from_str(line)
            .map_err(|e| Error::Checkpoint(format!("corrupt history line: {e}")))?;
        if stats.epoch <= upto {
            out.push(stats);
        }
    }
    Ok(out)
}

/// Reopen the history log truncated to completed epochs, ready to append.
fn open_history(path: &Path, upto: usize) -> Result<std::fs::File> {
    let kept = load_truncated_history(path, upto)?;
    let mut text = String::new();
    for stats in &kept {
        text.push_str(&serde_json::to_string(stats).expect("stats serialize"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))
}

fn append_history(file: &mut std::fs::File, stats: &EpochStats) -> Result<()> {
    let line = serde_json::to_string(stats).expect("stats serialize");
    writeln!(file, "{line}").map_err(|e| Error::Other(format!("history write failed: {e}")))?;
    file.flush()
        .map_err(|e| Error::Other(format!("history flush failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{write_toy_corpus, ToyCorpusSpec};
    use crate::synthesis::{generate_corpus, Backends, GenerateConfig, SynthesisMode};
    use crate::transforms::IntensityPreset;
    use tempfile::tempdir;

    /// Tiny merged corpus: toy reals plus identity-backend fakes.
    fn build_corpus(dir: &Path, n_speakers: usize, utts: usize) -> PathBuf {
        let spec = ToyCorpusSpec {
            n_speakers,
            utterances_per_speaker: utts,
            duration_secs: 0.6,
            seed: 11,
        };
        let (real_manifest, reals) = write_toy_corpus(dir, &spec).unwrap();
        let cfg = GenerateConfig {
            mode: SynthesisMode::Afss,
            branch_ratio: 0.5,
            preset: IntensityPreset::level(1).unwrap(),
            seed: 3,
        };
        let backends = Backends {
            vc: Box::new(crate::synthesis::IdentityVc),
            vocoders: vec![Box::new(crate::synthesis::GriffinLimVocoder::default())],
        };
        let out = generate_corpus(&real_manifest, dir, &cfg, &backends).unwrap();
        let mut merged = reals;
        merged.extend(out.fakes);
        let merged_path = dir.join("merged.tsv");
        crate::manifest::write_manifest(&merged_path, &merged).unwrap();
        merged_path
    }

    fn fast_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 3,
            warmup_epochs: 1,
            batch_size: 4,
            patience: 10,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_runs_records_history_and_respects_weight_bounds() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let run = tempdir().unwrap();
        let spec = DetectorSpec::micro();
        let outcome = train(&spec, &manifest, &manifest, &fast_cfg(), run.path()).unwrap();

        assert_eq!(outcome.history.len(), 3);
        assert_eq!(outcome.epochs_run, 3);
        for (i, stats) in outcome.history.iter().enumerate() {
            assert_eq!(stats.epoch, i + 1);
            assert!(stats.train_loss.is_finite());
            assert!(stats.w_fake > 1.0 && stats.w_fake < 2.0);
            assert!(stats.w_real > 0.0 && stats.w_real < 1.0);
            assert!((0.0..=1.0).contains(&stats.dev_eer));
        }
        let lines = std::fs::read_to_string(&outcome.history_path).unwrap();
        assert_eq!(lines.lines().count(), 3);
        assert!(outcome.best_path.exists() && outcome.last_path.exists());
    }

    #[test]
    fn identical_seeds_give_identical_history() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let spec = DetectorSpec::micro();
        let run_a = tempdir().unwrap();
        let run_b = tempdir().unwrap();
        let a = train(&spec, &manifest, &manifest, &fast_cfg(), run_a.path()).unwrap();
        let b = train(&spec, &manifest, &manifest, &fast_cfg(), run_b.path()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(
            std::fs::read(&a.history_path).unwrap(),
            std::fs::read(&b.history_path).unwrap()
        );
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn interrupted_run_resumes_bit_exactly() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let spec = DetectorSpec::micro();
        let cfg = fast_cfg();

        let full = tempdir().unwrap();
        let straight = train(&spec, &manifest, &manifest, &cfg, full.path()).unwrap();

        let split = tempdir().unwrap();
        let first = train_limited(&spec, &manifest, &manifest, &cfg, split.path(), Some(1)).unwrap();
        assert_eq!(first.epochs_run, 1);
        let second = train(&spec, &manifest, &manifest, &cfg, split.path()).unwrap();
        assert_eq!(second.epochs_run, 2);

        assert_eq!(straight.history, second.history);
        assert_eq!(
            std::fs::read(straight.history_path).unwrap(),
            std::fs::read(second.history_path).unwrap()
        );
        assert_eq!(straight.best, second.best);
        assert_eq!(
            load_checkpoint(&straight.last_path).unwrap(),
            load_checkpoint(&second.last_path).unwrap()
        );
    }

    #[test]
    fn resume_with_changed_config_is_refused() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let spec = DetectorSpec::micro();
        let run = tempdir().unwrap();
        let cfg = fast_cfg();
        train_limited(&spec, &manifest, &manifest, &cfg, run.path(), Some(1)).unwrap();

        let changed = TrainConfig {
            lr_head: 9e-4,
            ..cfg
        };
        let err = train(&spec, &manifest, &manifest, &changed, run.path()).unwrap_err();
        assert!(err.to_string().contains("different training config"), "{err}");
    }

    #[test]
    fn zero_learning_rates_stop_after_exactly_patience_epochs() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let spec = DetectorSpec::micro();
        let run = tempdir().unwrap();
        let cfg = TrainConfig {
            lr_front: 0.0,
            lr_head: 0.0,
            lr_loss: 0.0,
            final_lr: 0.0,
            weight_decay: 0.0,
            max_epochs: 20,
            warmup_epochs: 1,
            batch_size: 4,
            patience: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let outcome = train(&spec, &manifest, &manifest, &cfg, run.path()).unwrap();
        // Epoch 1 sets the baseline; epochs 2..4 fail to improve; stop.
        assert!(outcome.stopped_early);
        assert_eq!(outcome.history.len(), cfg.patience + 1);
        let eers: Vec<f64> = outcome.history.iter().map(|s| s.dev_eer).collect();
        assert!(eers.windows(2).all(|w| w[0] == w[1]), "{eers:?}");
    }

    #[test]
    fn single_class_dev_set_is_rejected() {
        let dir = tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2);
        let spec = ToyCorpusSpec {
            n_speakers: 2,
            utterances_per_speaker: 1,
            duration_secs: 0.6,
            seed: 12,
        };
        let real_dir = tempdir().unwrap();
        let (reals_only, _) = write_toy_corpus(real_dir.path(), &spec).unwrap();
        let run = tempdir().unwrap();
        let err = train(
            &DetectorSpec::micro(),
            &manifest,
            &reals_only,
            &fast_cfg(),
            run.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("both classes"), "{err}");
    }
}
