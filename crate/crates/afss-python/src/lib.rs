//! Python bindings for the afss pipeline: synthesis, training, evaluation,
//! scoring, manifest validation, and the score-level metrics.
//!
//! Config arguments are TOML text (pass `example_config()` output or your own
//! file's contents); an empty string selects every default. Labels in metric
//! functions are 0 for real and 1 for fake, and scores read higher-is-more-fake.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use afss_core::config::ExperimentConfig;
use afss_core::manifest::Label;
use afss_core::metrics::{ScoreEntry, ScoreSet};
use afss_core::{commands, manifest, metrics};

fn to_py_err(e: afss_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_config(toml_text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml_str(toml_text).map_err(to_py_err)
}

fn path_str(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn score_set(pairs: Vec<(f64, u8)>) -> PyResult<ScoreSet> {
    let entries = pairs
        .iter()
        .enumerate()
        .map(|(i, &(score, label))| {
            let label = match label {
                0 => Label::Real,
                1 => Label::Fake,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "label must be 0 (real) or 1 (fake), got {other}"
                    )))
                }
            };
            Ok(ScoreEntry {
                utterance_id: format!("utt{i}"),
                label,
                score,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    ScoreSet::new(entries).map_err(to_py_err)
}

/// Outcome of `synthesize`: corpus sizes, manifest paths, and per-provenance
/// fake counts.
#[pyclass(frozen, get_all)]
struct SynthesisResult {
    n_real: usize,
    n_fake: usize,
    fake_manifest: String,
    merged_manifest: String,
    counts: BTreeMap<String, usize>,
    skipped: Vec<(String, String)>,
}

#[pymethods]
impl SynthesisResult {
    fn __repr__(&self) -> String {
        format!(
            "SynthesisResult(n_real={}, n_fake={}, counts={:?}, skipped={})",
            self.n_real,
            self.n_fake,
            self.counts,
            self.skipped.len()
        )
    }
}

/// One training epoch's history line.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct EpochRow {
    epoch: usize,
    train_loss: f64,
    dev_eer: f64,
    w_fake: f64,
    w_real: f64,
}

#[pymethods]
impl EpochRow {
    fn __repr__(&self) -> String {
        format!(
            "EpochRow(epoch={}, train_loss={:.4}, dev_eer={:.4}, w_fake={:.4}, w_real={:.4})",
            self.epoch, self.train_loss, self.dev_eer, self.w_fake, self.w_real
        )
    }
}

/// Outcome of `train`: the best checkpoint's statistics plus the full
/// epoch-by-epoch history.
#[pyclass(frozen, get_all)]
struct TrainResult {
    best_dev_eer: f64,
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    best_checkpoint: String,
    last_checkpoint: String,
    history_path: String,
    history: Vec<EpochRow>,
}

#[pymethods]
impl TrainResult {
    fn __repr__(&self) -> String {
        format!(
            "TrainResult(best_dev_eer={:.4}, best_epoch={}, epochs_run={}, stopped_early={})",
            self.best_dev_eer,
            self.best_epoch,
            self.epochs_run,
            if self.stopped_early { "True" } else { "False" }
        )
    }
}

/// Metrics for one evaluated dataset.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct DatasetMetrics {
    name: String,
    eer: f64,
    auc: f64,
    acc: f64,
    ap: f64,
    n_real: usize,
    n_fake: usize,
    threshold: f64,
}

#[pymethods]
impl DatasetMetrics {
    fn __repr__(&self) -> String {
        format!(
            "DatasetMetrics(name={:?}, eer={:.4}, auc={:.4}, acc={:.4}, ap={:.4})",
            self.name, self.eer, self.auc, self.acc, self.ap
        )
    }
}

/// Unweighted means of the four metrics across datasets.
#[pyclass(frozen, get_all)]
struct AverageMetrics {
    eer: f64,
    auc: f64,
    acc: f64,
    ap: f64,
}

#[pymethods]
impl AverageMetrics {
    fn __repr__(&self) -> String {
        format!(
            "AverageMetrics(eer={:.4}, auc={:.4}, acc={:.4}, ap={:.4})",
            self.eer, self.auc, self.acc, self.ap
        )
    }
}

/// Outcome of `evaluate`: per-dataset rows, their average, and the path of
/// the JSON document both were written to.
#[pyclass(frozen, get_all)]
struct EvaluationResult {
    datasets: Vec<DatasetMetrics>,
    average: Py<AverageMetrics>,
    evaluation_path: String,
}

#[pymethods]
impl EvaluationResult {
    fn __repr__(&self) -> String {
        format!(
            "EvaluationResult(datasets={}, evaluation_path={:?})",
            self.datasets.len(),
            self.evaluation_path
        )
    }
}

/// Outcome of `score`: where the score file landed and what was skipped.
#[pyclass(frozen, get_all)]
struct ScoreResult {
    score_path: String,
    n_scored: usize,
    failures: Vec<(String, String)>,
}

#[pymethods]
impl ScoreResult {
    fn __repr__(&self) -> String {
        format!(
            "ScoreResult(score_path={:?}, n_scored={}, failures={})",
            self.score_path,
            self.n_scored,
            self.failures.len()
        )
    }
}

/// A fully commented example configuration in TOML.
#[pyfunction]
fn example_config() -> String {
    ExperimentConfig::example_toml()
}

/// Write a small synthetic all-real corpus (WAV files plus manifest) for
/// demos and tests; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (dir, n_speakers = 4, utterances_per_speaker = 3, duration_secs = 1.0, seed = 7))]
fn write_demo_corpus(
    dir: PathBuf,
    n_speakers: usize,
    utterances_per_speaker: usize,
    duration_secs: f64,
    seed: u64,
) -> PyResult<String> {
    let spec = afss_core::fixtures::ToyCorpusSpec {
        n_speakers,
        utterances_per_speaker,
        duration_secs,
        seed,
    };
    let (manifest, _) = afss_core::fixtures::write_toy_corpus(&dir, &spec).map_err(to_py_err)?;
    Ok(path_str(&manifest))
}

/// The default configuration, serialized to TOML.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_toml_string()
}

/// Check a manifest; returns a list of line-numbered problems (empty = valid).
#[pyfunction]
fn validate_manifest(manifest: PathBuf) -> PyResult<Vec<String>> {
    manifest::validate_manifest(&manifest).map_err(to_py_err)
}

/// Generate pseudo-fakes from an all-real manifest into `out_dir`, writing
/// `fake_manifest.tsv` and a merged real+fake training manifest.
#[pyfunction]
fn synthesize(
    py: Python<'_>,
    config: &str,
    real_manifest: PathBuf,
    out_dir: PathBuf,
) -> PyResult<SynthesisResult> {
    let cfg = parse_config(config)?;
    let out = py
        .detach(|| commands::cmd_synthesize(&cfg, &real_manifest, &out_dir))
        .map_err(to_py_err)?;
    Ok(SynthesisResult {
        n_real: out.n_real,
        n_fake: out.n_fake,
        fake_manifest: path_str(&out.fake_manifest),
        merged_manifest: path_str(&out.merged_manifest),
        counts: out
            .counts
            .iter()
            .map(|(k, &v)| (k.as_str().to_string(), v))
            .collect(),
        skipped: out.skipped,
    })
}

/// Train the detector, resuming from `run_dir/checkpoints/last.json` when
/// present. `force=True` discards a previous run whose config differs.
#[pyfunction]
#[pyo3(signature = (config, train_manifest, dev_manifest, run_dir, force = false))]
fn train(
    py: Python<'_>,
    config: &str,
    train_manifest: PathBuf,
    dev_manifest: PathBuf,
    run_dir: PathBuf,
    force: bool,
) -> PyResult<TrainResult> {
    let cfg = parse_config(config)?;
    let out = py
        .detach(|| commands::cmd_train(&cfg, &train_manifest, &dev_manifest, &run_dir, force))
        .map_err(to_py_err)?;
    Ok(TrainResult {
        best_dev_eer: out.best.best_dev_eer,
        best_epoch: out.best.epoch,
        epochs_run: out.epochs_run,
        stopped_early: out.stopped_early,
        best_checkpoint: path_str(&out.best_path),
        last_checkpoint: path_str(&out.last_path),
        history_path: path_str(&out.history_path),
        history: out
            .history
            .iter()
            .map(|s| EpochRow {
                epoch: s.epoch,
                train_loss: s.train_loss,
                dev_eer: s.dev_eer,
                w_fake: s.w_fake,
                w_real: s.w_real,
            })
            .collect(),
    })
}

/// Evaluate a checkpoint on one or more manifests, writing per-dataset score
/// files and `scores/evaluation.json` under `out_dir`. Passing `config`
/// cross-checks the detector architecture against the checkpoint.
#[pyfunction]
#[pyo3(signature = (checkpoint, manifests, out_dir, config = None))]
fn evaluate(
    py: Python<'_>,
    checkpoint: PathBuf,
    manifests: Vec<PathBuf>,
    out_dir: PathBuf,
    config: Option<&str>,
) -> PyResult<EvaluationResult> {
    let cfg = config.map(parse_config).transpose()?;
    let out = py
        .detach(|| commands::cmd_evaluate(cfg.as_ref(), &checkpoint, &manifests, &out_dir))
        .map_err(to_py_err)?;
    let average = Py::new(
        py,
        AverageMetrics {
            eer: out.average.eer,
            auc: out.average.auc,
            acc: out.average.acc,
            ap: out.average.ap,
        },
    )?;
    Ok(EvaluationResult {
        datasets: out
            .rows
            .iter()
            .map(|r| DatasetMetrics {
                name: r.name.clone(),
                eer: r.summary.eer,
                auc: r.summary.auc,
                acc: r.summary.acc,
                ap: r.summary.ap,
                n_real: r.summary.n_real,
                n_fake: r.summary.n_fake,
                threshold: r.summary.threshold,
            })
            .collect(),
        average,
        evaluation_path: path_str(&out.evaluation_path),
    })
}

/// Score a single manifest with a checkpoint, writing one `utt score` line
/// per record to `out`.
#[pyfunction]
fn score(
    py: Python<'_>,
    checkpoint: PathBuf,
    manifest: PathBuf,
    out: PathBuf,
) -> PyResult<ScoreResult> {
    let res = py
        .detach(|| commands::cmd_score(&checkpoint, &manifest, &out))
        .map_err(to_py_err)?;
    Ok(ScoreResult {
        score_path: path_str(&res.score_path),
        n_scored: res.n_scored,
        failures: res.failures,
    })
}

/// Equal error rate of `(score, label)` pairs; returns `(eer, threshold)`.
#[pyfunction]
fn eer(pairs: Vec<(f64, u8)>) -> PyResult<(f64, f64)> {
    metrics::eer(&score_set(pairs)?).map_err(to_py_err)
}

/// Area under the ROC curve of `(score, label)` pairs (ties count half).
#[pyfunction]
fn auc(pairs: Vec<(f64, u8)>) -> PyResult<f64> {
    metrics::auc(&score_set(pairs)?).map_err(to_py_err)
}

/// Average precision of `(score, label)` pairs with fake as the positive class.
#[pyfunction]
fn average_precision(pairs: Vec<(f64, u8)>) -> PyResult<f64> {
    metrics::average_precision(&score_set(pairs)?).map_err(to_py_err)
}

#[pymodule]
fn afss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SynthesisResult>()?;
    m.add_class::<EpochRow>()?;
    m.add_class::<TrainResult>()?;
    m.add_class::<DatasetMetrics>()?;
    m.add_class::<AverageMetrics>()?;
    m.add_class::<EvaluationResult>()?;
    m.add_class::<ScoreResult>()?;
    m.add_function(wrap_pyfunction!(example_config, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(validate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(eer, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    Ok(())
}
