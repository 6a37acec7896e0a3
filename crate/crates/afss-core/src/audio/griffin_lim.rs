use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;

use crate::audio::mel::{mel_to_linear, MelSpectrogram};
use crate::audio::stft::{istft, stft, Spectrogram};
use crate::audio::Waveform;
use crate::error::Result;

/// How Griffin-Lim seeds the unknown phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseInit {
    /// All-zero phase. Deterministic, the pipeline default.
    Zero,
    /// Uniform random phase in `[-pi, pi)` from a fixed seed.
    Seeded(u64),
}

/// Griffin-Lim phase reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct GriffinLim {
    pub iters: usize,
    pub phase_init: PhaseInit,
}

impl Default for GriffinLim {
    fn default() -> Self {
        GriffinLim {
            iters: 32,
            phase_init: PhaseInit::Zero,
        }
    }
}

impl GriffinLim {
    /// Recover audio from mel magnitudes: invert the filterbank to a linear
    /// magnitude estimate, then iterate ISTFT/STFT keeping the target
    /// magnitudes and the evolving phases.
    pub fn decode(&self, mel: &MelSpectrogram) -> Result<Waveform> {
        if self.iters == 0 {
            return Err(crate::error::Error::Config(
                "griffin-lim needs at least one iteration".into(),
            ));
        }
        if mel.data().is_empty() {
            return Err(crate::error::Error::InvalidInput(
                "cannot decode an empty mel spectrogram".into(),
            ));
        }
        let target = mel_to_linear(mel)?;
        self.decode_magnitude(&target, mel)
    }

    fn decode_magnitude(&self, target: &Array2<f64>, mel: &MelSpectrogram) -> Result<Waveform> {
        let phase = match self.phase_init {
            PhaseInit::Zero => Array2::zeros(target.dim()),
            PhaseInit::Seeded(seed) => {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
                Array2::from_shape_simple_fn(target.dim(), || {
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                })
            }
        };
        let mut spec = Spectrogram::from_polar(
            target,
            &phase,
            mel.params(),
            mel.sample_rate(),
            mel.n_samples(),
        )?;
        for _ in 0..self.iters {
            let w = istft(&spec)?;
            spec = stft(&w, mel.params())?.with_magnitude(target)?;
        }
        istft(&spec)
    }
}

/// [`GriffinLim::decode`] with zero-phase initialization.
pub fn griffin_lim_decode(mel: &MelSpectrogram, n_iters: usize) -> Result<Waveform> {
    GriffinLim {
        iters: n_iters,
        phase_init: PhaseInit::Zero,
    }
    .decode(mel)
}
