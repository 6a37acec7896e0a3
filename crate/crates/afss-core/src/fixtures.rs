//! Synthetic toy corpus for tests, examples, and smoke runs.
//!
//! Each "speaker" is a harmonic voice with its own fundamental and spectral
//! rolloff; each utterance varies the pitch contour, vibrato, and envelope.
//! Everything derives deterministically from the corpus seed, so fixtures are
//! reproducible across machines and runs.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::audio::{save_wav, Waveform, PIPELINE_RATE};
use crate::error::Result;
use crate::manifest::{write_manifest, SampleRecord};
use crate::rng::RngStream;

/// Shape of a generated toy corpus.
#[derive(Debug, Clone)]
pub struct ToyCorpusSpec {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub duration_secs: f64,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        ToyCorpusSpec {
            n_speakers: 8,
            utterances_per_speaker: 5,
            duration_secs: 2.0,
            seed: 7,
        }
    }
}

/// Speaker ids look like `spk03`.
pub fn speaker_id(speaker: usize) -> String {
    format!("spk{speaker:02}")
}

/// Utterance ids look like `spk03_utt01`.
pub fn utterance_id(speaker: usize, utt: usize) -> String {
    format!("{}_utt{utt:02}", speaker_id(speaker))
}

/// Render one toy utterance at the pipeline rate.
///
/// The voice is a six-harmonic stack: the fundamental encodes the speaker,
/// the rolloff shades their timbre, and per-utterance vibrato, pitch drift,
/// and amplitude modulation make utterances distinct. A raised-cosine fade
/// avoids edge clicks.
pub fn toy_utterance(spec: &ToyCorpusSpec, speaker: usize, utt: usize) -> Waveform {
    let n = (spec.duration_secs * PIPELINE_RATE as f64).round() as usize;
    let mut rng = RngStream::for_sample(spec.seed, &utterance_id(speaker, utt), "fixture");

    let f0 = 95.0 + 24.0 * speaker as f64;
    let rolloff = 1.0 + 0.15 * speaker as f64;
    let vibrato_hz = rng.random_range(3.0..7.0);
    let vibrato_depth = rng.random_range(0.005..0.02);
    let drift = rng.random_range(-0.03..0.03);
    let am_hz = rng.random_range(0.5..2.5);
    let am_depth = rng.random_range(0.05..0.25);

    let fade = (0.02 * PIPELINE_RATE as f64) as usize;
    let mut phase = 0.0_f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / PIPELINE_RATE as f64;
        let rel = i as f64 / n as f64;
        let f = f0 * (1.0 + drift * rel + vibrato_depth * (2.0 * PI * vibrato_hz * t).sin());
        phase += 2.0 * PI * f / PIPELINE_RATE as f64;
        let mut v = 0.0;
        for h in 1..=6 {
            v += (phase * h as f64).sin() / (h as f64).powf(rolloff);
        }
        let am = 1.0 - am_depth * (0.5 + 0.5 * (2.0 * PI * am_hz * t).sin());
        let edge = if i < fade {
            0.5 - 0.5 * (PI * i as f64 / fade as f64).cos()
        } else if i + fade > n {
            0.5 - 0.5 * (PI * (n - i) as f64 / fade as f64).cos()
        } else {
            1.0
        };
        samples.push(v * am * edge);
    }

    let peak = samples.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let gain = if peak > 0.0 { 0.3 / peak } else { 0.0 };
    let scaled: Vec<f32> = samples.iter().map(|&x| (x * gain) as f32).collect();
    Waveform::new(scaled, PIPELINE_RATE).expect("toy utterance is finite by construction")
}

/// Write a toy corpus under `dir`: WAVs in `dir/audio/`, a bona fide
/// manifest at `dir/real_manifest.tsv`. Returns the manifest path and the
/// records it contains.
pub fn write_toy_corpus(dir: &Path, spec: &ToyCorpusSpec) -> Result<(PathBuf, Vec<SampleRecord>)> {
    let audio_dir = dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| crate::error::Error::io(&audio_dir, e))?;

    let mut records = Vec::new();
    for speaker in 0..spec.n_speakers {
        for utt in 0..spec.utterances_per_speaker {
            let id = utterance_id(speaker, utt);
            let w = toy_utterance(spec, speaker, utt);
            let file = format!("{id}.wav");
            save_wav(audio_dir.join(&file), &w)?;
            records.push(SampleRecord::real(
                &id,
                PathBuf::from("audio").join(file),
                speaker_id(speaker),
            ));
        }
    }

    let manifest = dir.join("real_manifest.tsv");
    write_manifest(&manifest, &records)?;
    Ok((manifest, records))
}
