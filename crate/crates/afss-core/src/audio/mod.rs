//! Waveform representation, file I/O, resampling and spectral transforms.
//!
//! Everything downstream (transforms, synthesis, the detector front-end)
//! speaks [`Waveform`]: mono samples in `[-1, 1]` at an explicit sample rate.
//! The pipeline canonicalizes to 16 kHz on ingestion.

mod analysis;
mod griffin_lim;
mod mel;
mod resample;
mod stft;
mod wav;

pub use analysis::{band_power_db, dominant_frequency, harmonic_level_dbc};
pub use griffin_lim::{griffin_lim_decode, GriffinLim, PhaseInit};
pub use mel::{mel_encode, mel_filterbank, mel_to_linear, MelSpectrogram};
pub use resample::resample;
pub(crate) use resample::sinc_resample_to_len;
pub use stft::{hann_window, istft, stft, Spectrogram, StftParams};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

/// Canonical pipeline sample rate in Hz.
pub const PIPELINE_RATE: u32 = 16_000;

/// Mono audio: real-valued samples nominally in `[-1, 1]` plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub(crate) samples: Vec<f32>,
    pub(crate) sample_rate: u32,
}

impl Waveform {
    /// Build a waveform, rejecting a zero sample rate and non-finite samples.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample_rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    /// A silent waveform of `n` samples.
    pub fn silence(n: usize, sample_rate: u32) -> Self {
        Waveform {
            samples: vec![0.0; n],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square amplitude.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    /// Peak absolute amplitude.
    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, &s| m.max(s.abs()))
    }

    /// Samples widened to f64 for spectral processing.
    pub fn samples_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }
}
