//! Command layer behind the CLI: synthesize, train, evaluate, score, and
//! validate, each a deterministic function of (config, inputs, seed).
//!
//! Run-directory layout: `config.snapshot`, `manifests/`, `audio/`,
//! `checkpoints/`, `scores/`, `history.jsonl`. An OS advisory lock on
//! `.lock` guards against concurrent writers and dies with the process, so
//! an interrupted run never wedges the directory.

use std::collections::BTreeMap;
use std::fs::TryLockError;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::manifest::{
    read_manifest, validate_manifest, write_manifest, Provenance, SampleRecord,
};
use crate::metrics::{score_manifest, write_score_file, write_scores, EvalReport, Summary};
use crate::training::{load_checkpoint, train, TrainOutcome};

pub const SNAPSHOT_NAME: &str = "config.snapshot";
const LOCK_NAME: &str = ".lock";

/// Exclusive advisory lock on a run directory, released when dropped (or
/// when the process exits, however it exits).
#[derive(Debug)]
pub struct RunDirLock {
    _file: std::fs::File,
}

impl RunDirLock {
    pub fn acquire(dir: &Path) -> Result<RunDirLock> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_NAME);
        let file = std::fs::OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(RunDirLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(Error::Other(format!(
                "run directory {} is locked by another process",
                dir.display()
            ))),
            Err(TryLockError::Error(e)) => Err(Error::io(&path, e)),
        }
    }
}

fn ensure_layout(run_dir: &Path) -> Result<()> {
    for sub in ["manifests", "audio", "checkpoints", "scores"] {
        let dir = run_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    Ok(())
}

/// Echo the resolved config into the run directory. A differing existing
/// snapshot is refused unless `force`, which replaces it and clears stale
/// training state (checkpoints and history) so the new config starts clean.
fn write_snapshot(run_dir: &Path, cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let path = run_dir.join(SNAPSHOT_NAME);
    let text = cfg.resolved().to_toml_string();
    if path.exists() {
        let existing = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if existing == text {
            return Ok(());
        }
        if !force {
            return Err(Error::Config(format!(
                "{} holds a different config snapshot; rerun with --force to \
                 replace it and restart training from scratch",
                path.display()
            )));
        }
        for stale in ["checkpoints/best.json", "checkpoints/last.json", "history.jsonl"] {
            let p = run_dir.join(stale);
            if p.exists() {
                std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Copy a manifest into the run directory with audio paths made absolute,
/// so the run dir records exactly what was used.
fn import_manifest(manifest: &Path, dest: &Path) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut records = read_manifest(manifest)?;
    for r in &mut records {
        if !r.path.is_absolute() {
            r.path = std::path::absolute(base.join(&r.path))
                .map_err(|e| Error::io(&r.path, e))?;
        }
    }
    write_manifest(dest, &records)
}

/// What `cmd_synthesize` produced.
#[derive(Debug)]
pub struct SynthesizeOutcome {
    pub fake_manifest: PathBuf,
    pub merged_manifest: PathBuf,
    /// Real + fake records in the merged manifest.
    pub n_real: usize,
    pub n_fake: usize,
    pub counts: BTreeMap<Provenance, usize>,
    pub skipped: Vec<(String, String)>,
}

/// Generate the pseudo-fake corpus and the merged training manifest.
pub fn cmd_synthesize(
    cfg: &ExperimentConfig,
    real_manifest: &Path,
    out_dir: &Path,
) -> Result<SynthesizeOutcome> {
    reject_nonreal_lines(real_manifest)?;
    let _lock = RunDirLock::acquire(out_dir)?;

    let gen_cfg = cfg.generate_config()?;
    let backends = cfg.synthesis.backends();
    let corpus = crate::synthesis::generate_corpus(real_manifest, out_dir, &gen_cfg, &backends)?;

    let real_base = real_manifest.parent().unwrap_or(Path::new("."));
    let mut merged: Vec<SampleRecord> = read_manifest(real_manifest)?;
    for r in &mut merged {
        if !r.path.is_absolute() {
            r.path = std::path::absolute(real_base.join(&r.path))
                .map_err(|e| Error::io(&r.path, e))?;
        }
    }
    let mut counts: BTreeMap<Provenance, usize> = BTreeMap::new();
    let n_real = merged.len();
    let n_fake = corpus.fakes.len();
    for mut f in corpus.fakes {
        *counts.entry(f.provenance).or_insert(0) += 1;
        if !f.path.is_absolute() {
            f.path = std::path::absolute(out_dir.join(&f.path)).map_err(|e| Error::io(&f.path, e))?;
        }
        merged.push(f);
    }

    let manifests_dir = out_dir.join("manifests");
    std::fs::create_dir_all(&manifests_dir).map_err(|e| Error::io(&manifests_dir, e))?;
    let merged_manifest = manifests_dir.join("train.tsv");
    write_manifest(&merged_manifest, &merged)?;

    Ok(SynthesizeOutcome {
        fake_manifest: out_dir.join("fake_manifest.tsv"),
        merged_manifest,
        n_real,
        n_fake,
        counts,
        skipped: corpus.skipped,
    })
}

/// Fail with line numbers if any manifest line is not labeled real.
fn reject_nonreal_lines(manifest: &Path) -> Result<()> {
    let file = std::fs::File::open(manifest).map_err(|e| Error::io(manifest, e))?;
    let mut offending = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(manifest, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let label = line.split('\t').nth(2).unwrap_or("<missing>");
        if label != "bonafide" {
            offending.push(format!(
                "line {}: label '{label}' (synthesis input must be all bonafide)",
                idx + 1
            ));
        }
    }
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::ManifestValidation {
            report: offending.join("\n"),
        })
    }
}

/// Train in `run_dir`: snapshot the config, import the manifests, delegate
/// to the training loop (which auto-resumes from its last checkpoint).
pub fn cmd_train(
    cfg: &ExperimentConfig,
    train_manifest: &Path,
    dev_manifest: &Path,
    run_dir: &Path,
    force: bool,
) -> Result<TrainOutcome> {
    let _lock = RunDirLock::acquire(run_dir)?;
    ensure_layout(run_dir)?;
    write_snapshot(run_dir, cfg, force)?;

    let local_train = run_dir.join("manifests").join("train.tsv");
    let local_dev = run_dir.join("manifests").join("dev.tsv");
    import_manifest(train_manifest, &local_train)?;
    import_manifest(dev_manifest, &local_dev)?;

    let resolved = cfg.resolved();
    train(&resolved.detector, &local_train, &local_dev, &resolved.training, run_dir)
}

/// One evaluated dataset: manifest stem plus its four metrics.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetRow {
    pub name: String,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Unweighted mean of the four metrics across datasets.
#[derive(Debug, Clone, Serialize)]
pub struct AverageRow {
    pub eer: f64,
    pub auc: f64,
    pub acc: f64,
    pub ap: f64,
}

#[derive(Debug, Serialize)]
struct EvaluationDoc<'a> {
    datasets: &'a [DatasetRow],
    average: &'a AverageRow,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub rows: Vec<DatasetRow>,
    pub average: AverageRow,
    pub reports: Vec<EvalReport>,
    /// The combined document: per-dataset rows plus the average row.
    pub evaluation_path: PathBuf,
}

/// Score one or more eval manifests with a trained checkpoint, writing per
/// dataset score + summary files and one combined `evaluation.json`.
pub fn cmd_evaluate(
    cfg: Option<&ExperimentConfig>,
    checkpoint_path: &Path,
    manifests: &[PathBuf],
    out_dir: &Path,
) -> Result<EvaluateOutcome> {
    if manifests.is_empty() {
        return Err(Error::InvalidInput("no eval manifests given".into()));
    }
    let ckpt = load_checkpoint(checkpoint_path)?;
    if let Some(cfg) = cfg {
        if cfg.detector != ckpt.detector {
            return Err(Error::Checkpoint(format!(
                "checkpoint {} was trained with a different detector \
                 architecture than the config in force",
                checkpoint_path.display()
            )));
        }
    }
    let model = ckpt.restore_model()?;

    let _lock = RunDirLock::acquire(out_dir)?;
    let scores_dir = out_dir.join("scores");
    std::fs::create_dir_all(&scores_dir).map_err(|e| Error::io(&scores_dir, e))?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut used_names: BTreeMap<String, usize> = BTreeMap::new();
    for manifest in manifests {
        let stem = manifest
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "eval".to_string());
        let n = used_names.entry(stem.clone()).or_insert(0);
        *n += 1;
        let name = if *n == 1 { stem } else { format!("{stem}-{n}") };

        let report = write_scores(&model, manifest, &scores_dir.join(format!("{name}.txt")))?;
        rows.push(DatasetRow {
            name,
            summary: report.summary.clone(),
        });
        reports.push(report);
    }

    let k = rows.len() as f64;
    let average = AverageRow {
        eer: rows.iter().map(|r| r.summary.eer).sum::<f64>() / k,
        auc: rows.iter().map(|r| r.summary.auc).sum::<f64>() / k,
        acc: rows.iter().map(|r| r.summary.acc).sum::<f64>() / k,
        ap: rows.iter().map(|r| r.summary.ap).sum::<f64>() / k,
    };

    let evaluation_path = scores_dir.join("evaluation.json");
    let doc = EvaluationDoc {
        datasets: &rows,
        average: &average,
    };
    let json = serde_json::to_string_pretty(&doc).expect("evaluation doc serializes");
    std::fs::write(&evaluation_path, json).map_err(|e| Error::io(&evaluation_path, e))?;

    Ok(EvaluateOutcome {
        rows,
        average,
        reports,
        evaluation_path,
    })
}

#[derive(Debug)]
pub struct ScoreOutcome {
    pub score_path: PathBuf,
    pub n_scored: usize,
    pub failures: Vec<(String, String)>,
}

/// Score a manifest to a plain score file, no metrics required (works on
/// unlabeled or single-class data).
pub fn cmd_score(
    checkpoint_path: &Path,
    manifest: &Path,
    score_path: &Path,
) -> Result<ScoreOutcome> {
    let model = load_checkpoint(checkpoint_path)?.restore_model()?;
    let (scores, failures) = score_manifest(&model, manifest)?;
    if let Some(dir) = score_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    write_score_file(score_path, &scores)?;
    Ok(ScoreOutcome {
        score_path: score_path.to_path_buf(),
        n_scored: scores.len(),
        failures,
    })
}

/// Validation report for a manifest: empty means clean.
pub fn cmd_validate(manifest: &Path) -> Result<Vec<String>> {
    validate_manifest(manifest)
}
