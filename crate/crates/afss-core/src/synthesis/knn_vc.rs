//! Reference voice conversion: mel-domain k-nearest-neighbor frame matching
//! with Griffin-Lim resynthesis. Deterministic and dependency-free, it keeps
//! the shape of kNN-VC (feature matching, then vocoding) without pretrained
//! weights.

use ndarray::Array2;

use crate::audio::{griffin_lim_decode, mel_encode, MelSpectrogram, StftParams, Waveform};
use crate::error::{Error, Result};
use crate::synthesis::VCBackend;

const FEATURE_EPS: f64 = 1e-5;
const MIN_DURATION_SECS: f64 = 0.5;

/// Convert `source` toward `target_reference` by replacing each source
/// frame's mel magnitudes with the mean of its `k` nearest target frames
/// (cosine distance over log-mel features), then resynthesizing with
/// Griffin-Lim. The output keeps the source's exact length.
pub fn reference_knn_vc(
    source: &Waveform,
    target_reference: &Waveform,
    k: usize,
) -> Result<Waveform> {
    if k == 0 {
        return Err(Error::Config("knn_vc k must be >= 1".into()));
    }
    for (name, w) in [("source", source), ("target_reference", target_reference)] {
        if w.duration_secs() < MIN_DURATION_SECS {
            return Err(Error::InvalidInput(format!(
                "knn_vc {name} must be at least {MIN_DURATION_SECS} s, got {:.3} s",
                w.duration_secs()
            )));
        }
    }

    let params = StftParams::default();
    let n_mels = 80;
    let src_mel = mel_encode(source, params, n_mels)?;
    let tgt_mel = mel_encode(target_reference, params, n_mels)?;
    if tgt_mel.n_frames() < k {
        return Err(Error::Config(format!(
            "knn_vc k = {k} exceeds the {} target frames available",
            tgt_mel.n_frames()
        )));
    }

    let src_feat = src_mel.log_data(FEATURE_EPS);
    let tgt_feat = tgt_mel.log_data(FEATURE_EPS);

    let mut matched = Array2::zeros((src_mel.n_frames(), n_mels));
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(tgt_mel.n_frames());
    for i in 0..src_mel.n_frames() {
        scored.clear();
        let a = src_feat.row(i);
        for j in 0..tgt_mel.n_frames() {
            scored.push((cosine_distance(a.as_slice().unwrap(), tgt_feat.row(j).as_slice().unwrap()), j));
        }
        scored.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for &(_, j) in scored.iter().take(k) {
            for m in 0..n_mels {
                matched[[i, m]] += tgt_mel.data()[[j, m]];
            }
        }
        for m in 0..n_mels {
            matched[[i, m]] /= k as f64;
        }
    }

    let out_mel = MelSpectrogram {
        data: matched,
        params,
        n_mels,
        sample_rate: source.sample_rate(),
        n_samples: source.len(),
    };
    griffin_lim_decode(&out_mel, 32)
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = (na * nb).sqrt();
    if denom <= 0.0 {
        return 1.0;
    }
    1.0 - dot / denom
}

/// [`reference_knn_vc`] as a pluggable backend, with k = 4 by default.
#[derive(Debug, Clone)]
pub struct ReferenceKnnVc {
    pub k: usize,
}

impl Default for ReferenceKnnVc {
    fn default() -> Self {
        ReferenceKnnVc { k: 4 }
    }
}

impl VCBackend for ReferenceKnnVc {
    fn name(&self) -> &str {
        "knn_vc_reference"
    }

    fn convert(&self, source: &Waveform, target_reference: &Waveform) -> Result<Waveform> {
        reference_knn_vc(source, target_reference, self.k)
    }
}
