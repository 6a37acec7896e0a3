use std::path::PathBuf;
use std::process::Command;

use crate::audio::{
    griffin_lim_decode, load_wav, mel_encode, save_wav, StftParams, Waveform,
};
use crate::error::{Error, Result};
use crate::synthesis::{VCBackend, VocoderBackend};

/// VC backend that returns the source unchanged. Useful as a degenerate
/// baseline and for plumbing tests.
#[derive(Debug, Clone, Default)]
pub struct IdentityVc;

impl VCBackend for IdentityVc {
    fn name(&self) -> &str {
        "identity"
    }

    fn convert(&self, source: &Waveform, _target_reference: &Waveform) -> Result<Waveform> {
        Ok(source.clone())
    }
}

/// Vocoder backend that returns its input unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityVocoder;

impl VocoderBackend for IdentityVocoder {
    fn name(&self) -> &str {
        "identity"
    }

    fn reconstruct(&self, w: &Waveform) -> Result<Waveform> {
        Ok(w.clone())
    }
}

/// The reference vocoder: mel analysis followed by Griffin-Lim phase
/// reconstruction. Deliberately lossy; its over-smoothing and phase
/// artifacts are the fingerprint the detector learns from.
#[derive(Debug, Clone)]
pub struct GriffinLimVocoder {
    pub n_mels: usize,
    pub iters: usize,
    pub params: StftParams,
}

impl Default for GriffinLimVocoder {
    fn default() -> Self {
        GriffinLimVocoder {
            n_mels: 80,
            iters: 32,
            params: StftParams::default(),
        }
    }
}

impl VocoderBackend for GriffinLimVocoder {
    fn name(&self) -> &str {
        "griffin_lim"
    }

    fn reconstruct(&self, w: &Waveform) -> Result<Waveform> {
        let mel = mel_encode(w, self.params, self.n_mels)?;
        griffin_lim_decode(&mel, self.iters)
    }
}

/// External VC integrated over a subprocess protocol: the program is called
/// with `<extra args> source.wav target.wav output.wav` and must write the
/// converted audio to the output path and exit 0.
#[derive(Debug, Clone)]
pub struct SubprocessVc {
    pub backend_name: String,
    pub program: PathBuf,
    pub extra_args: Vec<String>,
}

impl VCBackend for SubprocessVc {
    fn name(&self) -> &str {
        &self.backend_name
    }

    fn convert(&self, source: &Waveform, target_reference: &Waveform) -> Result<Waveform> {
        let dir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;
        let src = dir.path().join("source.wav");
        let tgt = dir.path().join("target.wav");
        let out = dir.path().join("output.wav");
        save_wav(&src, source)?;
        save_wav(&tgt, target_reference)?;
        run_backend(
            &self.backend_name,
            &self.program,
            &self.extra_args,
            &[&src, &tgt, &out],
        )?;
        load_wav(&out)
    }
}

/// External vocoder over the same protocol: `<extra args> input.wav
/// output.wav`, exit 0 on success.
#[derive(Debug, Clone)]
pub struct SubprocessVocoder {
    pub backend_name: String,
    pub program: PathBuf,
    pub extra_args: Vec<String>,
}

impl VocoderBackend for SubprocessVocoder {
    fn name(&self) -> &str {
        &self.backend_name
    }

    fn reconstruct(&self, w: &Waveform) -> Result<Waveform> {
        let dir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;
        let input = dir.path().join("input.wav");
        let out = dir.path().join("output.wav");
        save_wav(&input, w)?;
        run_backend(
            &self.backend_name,
            &self.program,
            &self.extra_args,
            &[&input, &out],
        )?;
        load_wav(&out)
    }
}

fn run_backend(
    name: &str,
    program: &PathBuf,
    extra_args: &[String],
    paths: &[&PathBuf],
) -> Result<()> {
    let output = Command::new(program)
        .args(extra_args)
        .args(paths)
        .output()
        .map_err(|e| Error::Backend {
            backend: name.to_string(),
            utterance: String::new(),
            detail: format!("failed to launch {}: {e}", program.display()),
        })?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let excerpt: String = stderr.chars().take(500).collect();
        return Err(Error::Backend {
            backend: name.to_string(),
            utterance: String::new(),
            detail: format!("exited with {}: {excerpt}", output.status),
        });
    }
    Ok(())
}
