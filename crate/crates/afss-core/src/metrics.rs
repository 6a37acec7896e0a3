//! Evaluation metrics over score sets (EER, AUC, accuracy, average
//! precision), plus score-file and summary output.
//!
//! Score polarity is fixed everywhere: higher means more fake. Scores out of
//! the detector are the fake-class probability p.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, resample, Waveform, PIPELINE_RATE};
use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::manifest::{read_manifest, resolve_audio_path, Label};

/// One scored utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub utterance_id: String,
    pub label: Label,
    pub score: f64,
}

/// A labeled collection of scores; construction rejects non-finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite score {} for '{}'",
                bad.score, bad.utterance_id
            )));
        }
        Ok(ScoreSet { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_real(&self) -> usize {
        self.entries.iter().filter(|e| e.label == Label::Real).count()
    }

    pub fn n_fake(&self) -> usize {
        self.entries.iter().filter(|e| e.label == Label::Fake).count()
    }

    fn class_scores(&self) -> (Vec<f64>, Vec<f64>) {
        let mut reals = Vec::new();
        let mut fakes = Vec::new();
        for e in &self.entries {
            match e.label {
                Label::Real => reals.push(e.score),
                Label::Fake => fakes.push(e.score),
            }
        }
        (reals, fakes)
    }

    fn require_both_classes(&self, what: &str) -> Result<()> {
        if self.n_real() == 0 || self.n_fake() == 0 {
            return Err(Error::InvalidInput(format!(
                "{what} needs both classes, got {} real / {} fake",
                self.n_real(),
                self.n_fake()
            )));
        }
        Ok(())
    }
}

/// Equal error rate and its operating threshold.
///
/// FAR(t) is the fraction of real entries with score ≥ t and FRR(t) the
/// fraction of fake entries with score < t. Both are evaluated at every
/// distinct score; the crossing FAR = FRR is located by linear interpolation
/// between the two adjacent evaluation points. Because the interpolation
/// weight depends only on the FAR/FRR values, the EER is invariant under any
/// strictly monotone transform of the scores.
pub fn eer(s: &ScoreSet) -> Result<(f64, f64)> {
    s.require_both_classes("eer")?;
    let (reals, fakes) = s.class_scores();
    let n_r = reals.len() as f64;
    let n_f = fakes.len() as f64;

    let mut thresholds: Vec<f64> = s.entries.iter().map(|e| e.score).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    // Sentinels below and above every score pin the endpoints
    // (FAR, FRR) = (1, 0) and (0, 1).
    thresholds.insert(0, thresholds[0] - 1.0);
    thresholds.push(thresholds[thresholds.len() - 1] + 1.0);

    let far = |t: f64| reals.iter().filter(|&&x| x >= t).count() as f64 / n_r;
    let frr = |t: f64| fakes.iter().filter(|&&x| x < t).count() as f64 / n_f;

    let mut prev_t = thresholds[0];
    let mut prev_far = far(prev_t);
    let mut prev_frr = frr(prev_t);
    if prev_far - prev_frr == 0.0 {
        return Ok((prev_far, prev_t));
    }
    for &t in &thresholds[1..] {
        let cur_far = far(t);
        let cur_frr = frr(t);
        let prev_diff = prev_far - prev_frr;
        let cur_diff = cur_far - cur_frr;
        if cur_diff == 0.0 {
            return Ok((cur_far, t));
        }
        if prev_diff > 0.0 && cur_diff < 0.0 {
            let w = prev_diff / (prev_diff - cur_diff);
            let e = prev_far + (cur_far - prev_far) * w;
            let thr = prev_t + (t - prev_t) * w;
            return Ok((e, thr));
        }
        prev_t = t;
        prev_far = cur_far;
        prev_frr = cur_frr;
    }
    unreachable!("sentinel thresholds guarantee a FAR/FRR crossing");
}

/// Area under the ROC curve via the Mann-Whitney statistic with midrank tie
/// correction: P(fake > real) + ½·P(fake = real).
pub fn auc(s: &ScoreSet) -> Result<f64> {
    s.require_both_classes("auc")?;
    let mut indexed: Vec<(f64, Label)> = s.entries.iter().map(|e| (e.score, e.label)).collect();
    indexed.sort_by(|a, b| f64::total_cmp(&a.0, &b.0));

    let n = indexed.len();
    let mut rank_sum_fake = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        // Ranks are 1-based; tied entries share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for e in &indexed[i..j] {
            if e.1 == Label::Fake {
                rank_sum_fake += midrank;
            }
        }
        i = j;
    }
    let n_f = s.n_fake() as f64;
    let n_r = s.n_real() as f64;
    Ok((rank_sum_fake - n_f * (n_f + 1.0) / 2.0) / (n_f * n_r))
}

/// Fraction of entries classified correctly at `threshold`: an entry is
/// called fake when its score ≥ threshold.
pub fn accuracy(s: &ScoreSet, threshold: f64) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty score set".into()));
    }
    let correct = s
        .entries
        .iter()
        .filter(|e| (e.score >= threshold) == (e.label == Label::Fake))
        .count();
    Ok(correct as f64 / s.len() as f64)
}

/// Average precision with fake as the positive class. Entries are ranked by
/// descending score; ties enter as one group, so the result is independent
/// of the ordering among equal scores.
pub fn average_precision(s: &ScoreSet) -> Result<f64> {
    let n_fake = s.n_fake();
    if n_fake == 0 {
        return Err(Error::InvalidInput(
            "average precision needs at least one fake entry".into(),
        ));
    }
    let mut sorted: Vec<(f64, Label)> = s.entries.iter().map(|e| (e.score, e.label)).collect();
    sorted.sort_by(|a, b| f64::total_cmp(&b.0, &a.0));

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        tp += sorted[i..j].iter().filter(|e| e.1 == Label::Fake).count();
        seen = j;
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / n_fake as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    debug_assert_eq!(seen, sorted.len());
    Ok(ap)
}

/// The four headline metrics plus operating details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub eer: f64,
    pub auc: f64,
    pub acc: f64,
    pub ap: f64,
    pub n_real: usize,
    pub n_fake: usize,
    pub threshold: f64,
}

/// Classification threshold for the accuracy column: 0.5 on probabilities.
pub const ACC_THRESHOLD: f64 = 0.5;

pub fn summarize(s: &ScoreSet) -> Result<Summary> {
    let (eer_value, threshold) = eer(s)?;
    Ok(Summary {
        eer: eer_value,
        auc: auc(s)?,
        acc: accuracy(s, ACC_THRESHOLD)?,
        ap: average_precision(s)?,
        n_real: s.n_real(),
        n_fake: s.n_fake(),
        threshold,
    })
}

/// Plain-text score file: one `utterance_id score` per line, LF endings.
pub fn write_score_file(path: &Path, s: &ScoreSet) -> Result<()> {
    let mut out = String::new();
    for e in &s.entries {
        out.push_str(&format!("{} {}\n", e.utterance_id, e.score));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_score_file(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(utt), Some(score), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidInput(format!(
                "{}:{}: expected 'utterance_id score'",
                path.display(),
                i + 1
            )));
        };
        let score: f64 = score.parse().map_err(|_| {
            Error::InvalidInput(format!("{}:{}: bad score '{score}'", path.display(), i + 1))
        })?;
        out.push((utt.to_string(), score));
    }
    Ok(out)
}

/// Everything produced by scoring one manifest.
#[derive(Debug)]
pub struct EvalReport {
    pub scores: ScoreSet,
    pub summary: Summary,
    /// (utterance_id, reason) for entries that could not be scored.
    pub failures: Vec<(String, String)>,
    pub score_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Score every utterance in `manifest_path` with the model in eval mode.
///
/// The score file is always written (even when metrics cannot be computed);
/// the companion summary JSON lands next to it with the extension
/// `.summary.json`. Per-utterance read failures are collected and scoring
/// continues; metric computation errors (empty or single-class sets)
/// propagate after the score file is on disk.
pub fn write_scores(
    model: &DetectorModel,
    manifest_path: &Path,
    score_path: &Path,
) -> Result<EvalReport> {
    let (scores, failures) = score_manifest(model, manifest_path)?;
    if let Some(dir) = score_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    write_score_file(score_path, &scores)?;

    let summary = summarize(&scores)?;
    let summary_path = summary_companion_path(score_path);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;

    Ok(EvalReport {
        scores,
        summary,
        failures,
        score_path: score_path.to_path_buf(),
        summary_path,
    })
}

/// Score every manifest entry in eval mode, in parallel. Per-utterance
/// failures are collected (with a warning) and scoring continues.
pub fn score_manifest(
    model: &DetectorModel,
    manifest_path: &Path,
) -> Result<(ScoreSet, Vec<(String, String)>)> {
    let records = read_manifest(manifest_path)?;

    let results: Vec<std::result::Result<ScoreEntry, (String, String)>> = records
        .par_iter()
        .map(|r| {
            score_one(model, manifest_path, r)
                .map(|score| ScoreEntry {
                    utterance_id: r.utterance_id.clone(),
                    label: r.label,
                    score,
                })
                .map_err(|e| (r.utterance_id.clone(), e.to_string()))
        })
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err((utt, reason)) => {
                log::warn!("scoring '{utt}' failed: {reason}");
                failures.push((utt, reason));
            }
        }
    }
    Ok((ScoreSet::new(entries)?, failures))
}

/// `scores/eval.txt` → `scores/eval.summary.json`.
pub fn summary_companion_path(score_path: &Path) -> PathBuf {
    let stem = score_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scores".to_string());
    score_path.with_file_name(format!("{stem}.summary.json"))
}

fn score_one(
    model: &DetectorModel,
    manifest_path: &Path,
    record: &crate::manifest::SampleRecord,
) -> Result<f64> {
    let path = resolve_audio_path(manifest_path, record);
    let w = load_wav(&path)?;
    let w = if w.sample_rate() == PIPELINE_RATE {
        w
    } else {
        resample(&w, PIPELINE_RATE)?
    };
    let (_, p) = model.forward_eval(&w)?;
    Ok(p)
}

/// Convenience used by training: score in-memory waveforms.
pub fn score_waveforms(
    model: &DetectorModel,
    items: &[(String, Label, Waveform)],
) -> Result<ScoreSet> {
    let entries = items
        .par_iter()
        .map(|(utt, label, w)| {
            let (_, p) = model.forward_eval(w)?;
            Ok(ScoreEntry {
                utterance_id: utt.clone(),
                label: *label,
                score: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreSet::new(entries)
}
