use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Analysis parameters shared by [`stft`] and [`istft`].
///
/// The Hann window has `win_length` samples and sits centered inside the
/// `n_fft`-point frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StftParams {
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            n_fft: 1024,
            hop: 256,
            win_length: 1024,
        }
    }
}

impl StftParams {
    /// Reject degenerate sizes and hops that break overlap-add coverage.
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || self.n_fft % 2 != 0 {
            return Err(Error::Config(format!(
                "n_fft must be even and >= 2, got {}",
                self.n_fft
            )));
        }
        if self.win_length < 2 || self.win_length > self.n_fft {
            return Err(Error::Config(format!(
                "win_length must be in 2..=n_fft, got {} with n_fft {}",
                self.win_length, self.n_fft
            )));
        }
        if self.hop == 0 {
            return Err(Error::Config("hop must be > 0".into()));
        }
        if self.hop > self.win_length / 2 {
            return Err(Error::Config(format!(
                "hop {} exceeds win_length/2 = {}; the Hann window would not overlap-add to full coverage",
                self.hop,
                self.win_length / 2
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a signal of `n` samples with center padding.
    pub fn n_frames(&self, n: usize) -> usize {
        n / self.hop + 1
    }

    /// Hann window of `win_length` samples centered in an `n_fft` buffer.
    fn padded_window(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fft];
        let offset = (self.n_fft - self.win_length) / 2;
        for (k, v) in hann_window(self.win_length).into_iter().enumerate() {
            out[offset + k] = v;
        }
        out
    }
}

/// Periodic Hann window: `0.5 * (1 - cos(2*pi*k / n))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Complex STFT of a waveform, laid out `[n_frames, n_bins]`.
///
/// Carries the originating sample count so the inverse restores length
/// exactly.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub(crate) data: Array2<Complex<f64>>,
    pub(crate) params: StftParams,
    pub(crate) sample_rate: u32,
    pub(crate) n_samples: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn data(&self) -> &Array2<Complex<f64>> {
        &self.data
    }

    /// Per-bin magnitudes `|X|`.
    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    /// Replace magnitudes while keeping phases; magnitude shape must match.
    pub fn with_magnitude(&self, magnitude: &Array2<f64>) -> Result<Spectrogram> {
        if magnitude.dim() != self.data.dim() {
            return Err(Error::InvalidInput(format!(
                "magnitude shape {:?} does not match spectrogram {:?}",
                magnitude.dim(),
                self.data.dim()
            )));
        }
        let mut data = self.data.clone();
        for (c, &m) in data.iter_mut().zip(magnitude.iter()) {
            let norm = c.norm();
            *c = if norm > 0.0 {
                *c * (m / norm)
            } else {
                Complex::new(m, 0.0)
            };
        }
        Ok(Spectrogram {
            data,
            params: self.params,
            sample_rate: self.sample_rate,
            n_samples: self.n_samples,
        })
    }

    /// Build a spectrogram from magnitudes and phases (radians).
    pub fn from_polar(
        magnitude: &Array2<f64>,
        phase: &Array2<f64>,
        params: StftParams,
        sample_rate: u32,
        n_samples: usize,
    ) -> Result<Spectrogram> {
        params.validate()?;
        if magnitude.dim() != phase.dim() {
            return Err(Error::InvalidInput(format!(
                "magnitude shape {:?} does not match phase {:?}",
                magnitude.dim(),
                phase.dim()
            )));
        }
        if magnitude.ncols() != params.n_bins() {
            return Err(Error::InvalidInput(format!(
                "expected {} bins, got {}",
                params.n_bins(),
                magnitude.ncols()
            )));
        }
        let data = ndarray::Zip::from(magnitude)
            .and(phase)
            .map_collect(|&m, &p| Complex::from_polar(m, p));
        Ok(Spectrogram {
            data,
            params,
            sample_rate,
            n_samples,
        })
    }
}

/// Short-time Fourier transform with center zero-padding of `n_fft / 2`
/// samples on both sides, producing `floor(n / hop) + 1` frames.
pub fn stft(w: &Waveform, params: StftParams) -> Result<Spectrogram> {
    params.validate()?;
    let n = w.len();
    let n_fft = params.n_fft;
    let pad = n_fft / 2;
    let mut padded = vec![0.0f64; n + n_fft];
    for (i, &s) in w.samples.iter().enumerate() {
        padded[pad + i] = s as f64;
    }

    let window = params.padded_window();
    let n_frames = params.n_frames(n);
    let n_bins = params.n_bins();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];

    let mut data = Array2::zeros((n_frames, n_bins));
    for t in 0..n_frames {
        let start = t * params.hop;
        for k in 0..n_fft {
            buf[k] = Complex::new(padded[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        for b in 0..n_bins {
            data[[t, b]] = buf[b];
        }
    }

    Ok(Spectrogram {
        data,
        params,
        sample_rate: w.sample_rate,
        n_samples: n,
    })
}

/// Inverse STFT by windowed overlap-add, normalized by the accumulated
/// squared window, trimmed back to the recorded sample count.
pub fn istft(spec: &Spectrogram) -> Result<Waveform> {
    spec.params.validate()?;
    let n_fft = spec.params.n_fft;
    let hop = spec.params.hop;
    let n_bins = spec.params.n_bins();
    if spec.n_bins() != n_bins {
        return Err(Error::InvalidInput(format!(
            "spectrogram has {} bins, params imply {}",
            spec.n_bins(),
            n_bins
        )));
    }
    let n_frames = spec.n_frames();
    let padded_len = (n_frames.saturating_sub(1)) * hop + n_fft;

    let window = spec.params.padded_window();
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];

    let mut acc = vec![0.0f64; padded_len];
    let mut wsum = vec![0.0f64; padded_len];
    for t in 0..n_frames {
        for b in 0..n_bins {
            buf[b] = spec.data[[t, b]];
        }
        for b in n_bins..n_fft {
            buf[b] = spec.data[[t, n_fft - b]].conj();
        }
        ifft.process(&mut buf);
        let start = t * hop;
        for k in 0..n_fft {
            let v = buf[k].re / n_fft as f64;
            acc[start + k] += v * window[k];
            wsum[start + k] += window[k] * window[k];
        }
    }

    let pad = n_fft / 2;
    let mut out = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let j = pad + i;
        let v = if j < padded_len && wsum[j] > 1e-11 {
            acc[j] / wsum[j]
        } else {
            0.0
        };
        out.push(v as f32);
    }
    Waveform::new(out, spec.sample_rate)
}
