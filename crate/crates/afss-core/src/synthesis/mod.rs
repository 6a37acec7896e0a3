//! Pseudo-fake synthesis: the self-conversion and self-reconstruction
//! branches, the cross-speaker baseline, and the corpus generator.
//!
//! Both self-* branches keep the speaker fixed: a fake derives from one real
//! utterance of one speaker and is labeled with that same speaker. The
//! detector therefore cannot separate classes by speaker identity, channel,
//! or content; only synthesis artifacts remain.

mod backends;
mod knn_vc;

pub use backends::{
    GriffinLimVocoder, IdentityVc, IdentityVocoder, SubprocessVc, SubprocessVocoder,
};
pub use knn_vc::{reference_knn_vc, ReferenceKnnVc};

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, resample, save_wav, Waveform, PIPELINE_RATE};
use crate::error::{Error, Result};
use crate::manifest::{
    read_manifest, write_manifest, Label, Provenance, SampleRecord, TransformLog,
    TransformLogEntry,
};
use crate::rng::RngStream;
use crate::transforms::{
    apply_transform, rawboost_detailed, sample_transform, AppliedTransform, IntensityPreset,
    RawBoostConfig, TransformKind,
};

/// Voice conversion backend: re-render `source`'s content in the voice of
/// `target_reference`. Output must be at the pipeline rate and finite.
pub trait VCBackend: Send + Sync {
    fn name(&self) -> &str;
    fn convert(&self, source: &Waveform, target_reference: &Waveform) -> Result<Waveform>;
}

/// Vocoder backend: analyze and re-synthesize a waveform. Output length must
/// stay within one hop (256 samples) of the input.
pub trait VocoderBackend: Send + Sync {
    fn name(&self) -> &str;
    fn reconstruct(&self, w: &Waveform) -> Result<Waveform>;
}

const SILENCE_RMS: f64 = 1e-5;
const VOCODER_LENGTH_TOLERANCE: usize = 256;

/// Self-conversion: draw one transform, apply it to the base audio, then
/// voice-convert the base toward its own transformed variant. Speaker
/// identity and content are preserved by construction; only conversion
/// artifacts distinguish the output.
pub fn self_convert(
    x_b: &Waveform,
    speaker_id: &str,
    preset: &IntensityPreset,
    vc: &dyn VCBackend,
    rng: &mut impl Rng,
) -> Result<(Waveform, TransformLog)> {
    if x_b.rms() <= SILENCE_RMS {
        return Err(Error::InvalidInput(
            "self_convert input is silent (RMS <= 1e-5)".into(),
        ));
    }
    let sampled = sample_transform(&TransformKind::ALL, preset, rng)?;
    let (x_t, applied) = apply_transform(x_b, &sampled, preset, rng)?;
    let out = vc.convert(x_b, &x_t)?;
    check_rate(vc.name(), &out)?;
    let log = TransformLog {
        backend: Some(vc.name().to_string()),
        target_speaker: Some(speaker_id.to_string()),
        target_utterance: None,
        entries: vec![TransformLogEntry {
            stage: "pre_vc".into(),
            transform: applied,
        }],
    };
    Ok((out, log))
}

/// Self-reconstruction: pass the base audio through a vocoder, then degrade
/// with RawBoost only. No other transform ever touches this branch.
pub fn self_reconstruct(
    x_b: &Waveform,
    _speaker_id: &str,
    cfg: &RawBoostConfig,
    voc: &dyn VocoderBackend,
    rng: &mut impl Rng,
) -> Result<(Waveform, TransformLog)> {
    let recon = voc.reconstruct(x_b)?;
    check_rate(voc.name(), &recon)?;
    if recon.len().abs_diff(x_b.len()) > VOCODER_LENGTH_TOLERANCE {
        return Err(Error::Backend {
            backend: voc.name().to_string(),
            utterance: String::new(),
            detail: format!(
                "reconstruction length {} too far from input length {}",
                recon.len(),
                x_b.len()
            ),
        });
    }
    let (out, draw) = rawboost_detailed(&recon, cfg, rng)?;
    let log = TransformLog {
        backend: Some(voc.name().to_string()),
        target_speaker: None,
        target_utterance: None,
        entries: vec![TransformLogEntry {
            stage: "post_rec".into(),
            transform: AppliedTransform::RawBoost { draw },
        }],
    };
    Ok((out, log))
}

/// Cross-speaker conversion, the ablation baseline: convert the base audio
/// toward a reference from a different speaker.
pub fn cross_convert(
    x_b: &Waveform,
    source_speaker: &str,
    target: &SampleRecord,
    target_audio: &Waveform,
    vc: &dyn VCBackend,
) -> Result<(Waveform, TransformLog)> {
    if target.speaker_id == source_speaker {
        return Err(Error::InvalidInput(format!(
            "cross_convert requires a different-speaker target, both are '{source_speaker}'"
        )));
    }
    let out = vc.convert(x_b, target_audio)?;
    check_rate(vc.name(), &out)?;
    let log = TransformLog {
        backend: Some(vc.name().to_string()),
        target_speaker: Some(target.speaker_id.clone()),
        target_utterance: Some(target.utterance_id.clone()),
        entries: vec![],
    };
    Ok((out, log))
}

fn check_rate(backend: &str, w: &Waveform) -> Result<()> {
    if w.sample_rate() != PIPELINE_RATE {
        return Err(Error::Backend {
            backend: backend.to_string(),
            utterance: String::new(),
            detail: format!(
                "backend produced sample rate {}, pipeline expects {PIPELINE_RATE}",
                w.sample_rate()
            ),
        });
    }
    Ok(())
}

/// Which fakes the generator produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Same-speaker self-synthesis: self-conversion and self-reconstruction.
    Afss,
    /// Cross-speaker VC baseline.
    CrossVc,
}

/// Backends available to the generator.
pub struct Backends {
    pub vc: Box<dyn VCBackend>,
    pub vocoders: Vec<Box<dyn VocoderBackend>>,
}

impl Backends {
    /// Identity VC plus the Griffin-Lim reference vocoder.
    pub fn reference() -> Self {
        Backends {
            vc: Box::new(ReferenceKnnVc::default()),
            vocoders: vec![Box::new(GriffinLimVocoder::default())],
        }
    }
}

/// Generator settings.
#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub mode: SynthesisMode,
    /// Probability that a real sample feeds self-conversion rather than
    /// self-reconstruction (afss mode only).
    pub branch_ratio: f64,
    pub preset: IntensityPreset,
    pub seed: u64,
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.branch_ratio) {
            return Err(Error::Config(format!(
                "branch_ratio must lie in [0, 1], got {}",
                self.branch_ratio
            )));
        }
        self.preset.validate()
    }
}

/// Result of one generation run.
#[derive(Debug)]
pub struct GeneratedCorpus {
    pub fakes: Vec<SampleRecord>,
    /// (utterance_id, reason) for every skipped real.
    pub skipped: Vec<(String, String)>,
}

/// Turn a real-only manifest into pseudo-fakes: one fake per real.
///
/// Fake audio lands in `out_dir/audio/`, and `out_dir/fake_manifest.tsv`
/// indexes it. Per-sample randomness is keyed by `(seed, utterance_id,
/// stage)`, so reruns are byte-identical and worker count does not matter.
/// Individual failures are skipped and reported; more than 1% failing
/// aborts the run.
pub fn generate_corpus(
    real_manifest: &Path,
    out_dir: &Path,
    cfg: &GenerateConfig,
    backends: &Backends,
) -> Result<GeneratedCorpus> {
    cfg.validate()?;
    let reals = read_manifest(real_manifest)?;
    if reals.is_empty() {
        return Err(Error::InvalidInput(format!(
            "real manifest {} is empty",
            real_manifest.display()
        )));
    }
    if let Some(bad) = reals.iter().find(|r| r.label != Label::Real) {
        return Err(Error::InvalidInput(format!(
            "generate_corpus expects only bona fide records; '{}' is labeled {}",
            bad.utterance_id,
            bad.label.as_manifest_str()
        )));
    }
    if cfg.mode == SynthesisMode::Afss && backends.vocoders.is_empty() {
        return Err(Error::Config("afss mode needs at least one vocoder".into()));
    }

    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let results: Vec<std::result::Result<SampleRecord, (String, String)>> = reals
        .par_iter()
        .map(|real| {
            synthesize_one(real, &reals, real_manifest, &audio_dir, cfg, backends)
                .map_err(|e| (real.utterance_id.clone(), e.to_string()))
        })
        .collect();

    let mut fakes = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(record) => fakes.push(record),
            Err((utt, reason)) => {
                log::warn!("skipping '{utt}': {reason}");
                skipped.push((utt, reason));
            }
        }
    }

    let total = reals.len();
    if skipped.len() as f64 > 0.01 * total as f64 {
        let examples = skipped
            .iter()
            .take(5)
            .map(|(utt, reason)| format!("  {utt}: {reason}"))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(Error::TooManyFailures {
            failed: skipped.len(),
            total,
            examples,
        });
    }

    write_manifest(out_dir.join("fake_manifest.tsv"), &fakes)?;
    Ok(GeneratedCorpus { fakes, skipped })
}

fn synthesize_one(
    real: &SampleRecord,
    reals: &[SampleRecord],
    real_manifest: &Path,
    audio_dir: &Path,
    cfg: &GenerateConfig,
    backends: &Backends,
) -> Result<SampleRecord> {
    let utt = &real.utterance_id;
    let x_b = load_pipeline_audio(real_manifest, real)?;

    let (suffix, provenance, out, mut log) = match cfg.mode {
        SynthesisMode::CrossVc => {
            let candidates: Vec<&SampleRecord> = reals
                .iter()
                .filter(|r| r.speaker_id != real.speaker_id)
                .collect();
            if candidates.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no different-speaker target available for '{utt}'"
                )));
            }
            let mut pick_rng = RngStream::for_sample(cfg.seed, utt, "cross_target");
            let target = candidates[pick_rng.random_range(0..candidates.len())];
            let target_audio = load_pipeline_audio(real_manifest, target)?;
            let (out, log) = cross_convert(
                &x_b,
                &real.speaker_id,
                target,
                &target_audio,
                backends.vc.as_ref(),
            )
            .map_err(|e| tag_utterance(e, utt))?;
            ("xvc", Provenance::CrossVc, out, log)
        }
        SynthesisMode::Afss => {
            let mut branch_rng = RngStream::for_sample(cfg.seed, utt, "branch");
            let to_vc = branch_rng.random::<f64>() < cfg.branch_ratio;
            if to_vc {
                let mut rng = RngStream::for_sample(cfg.seed, utt, "self_vc");
                let (out, log) = self_convert(
                    &x_b,
                    &real.speaker_id,
                    &cfg.preset,
                    backends.vc.as_ref(),
                    &mut rng,
                )
                .map_err(|e| tag_utterance(e, utt))?;
                ("vc", Provenance::SelfVc, out, log)
            } else {
                let mut pick_rng = RngStream::for_sample(cfg.seed, utt, "vocoder_pick");
                let voc = &backends.vocoders[pick_rng.random_range(0..backends.vocoders.len())];
                let mut rng = RngStream::for_sample(cfg.seed, utt, "self_rec");
                let (out, log) = self_reconstruct(
                    &x_b,
                    &real.speaker_id,
                    &cfg.preset.rawboost,
                    voc.as_ref(),
                    &mut rng,
                )
                .map_err(|e| tag_utterance(e, utt))?;
                ("rec", Provenance::SelfRec, out, log)
            }
        }
    };

    if log.target_utterance.is_none() && provenance != Provenance::SelfRec {
        log.target_utterance = Some(utt.clone());
    }

    let fake_id = format!("{utt}_{suffix}");
    let file_name = format!("{fake_id}.wav");
    save_wav(audio_dir.join(&file_name), &out)?;

    Ok(SampleRecord {
        utterance_id: fake_id,
        path: std::path::PathBuf::from("audio").join(file_name),
        label: Label::Fake,
        speaker_id: real.speaker_id.clone(),
        provenance,
        transform_log: log,
    })
}

fn load_pipeline_audio(manifest_path: &Path, record: &SampleRecord) -> Result<Waveform> {
    let path = crate::manifest::resolve_audio_path(manifest_path, record);
    let w = load_wav(&path)?;
    if w.sample_rate() == PIPELINE_RATE {
        Ok(w)
    } else {
        resample(&w, PIPELINE_RATE)
    }
}

fn tag_utterance(e: Error, utt: &str) -> Error {
    match e {
        Error::Backend {
            backend, detail, ..
        } => Error::Backend {
            backend,
            utterance: utt.to_string(),
            detail,
        },
        other => other,
    }
}
