//! Phase-vocoder time stretching and pitch shifting.

use ndarray::Array2;
use rustfft::num_complex::Complex;

use crate::audio::sinc_resample_to_len;
use crate::audio::{istft, stft, Spectrogram, StftParams, Waveform};
use crate::error::{Error, Result};

/// Change playback speed without changing pitch.
///
/// `rate` is the speed factor: the output has `round(n / rate)` samples.
/// Frames are stepped through the STFT at `rate`-spaced positions with
/// linear magnitude interpolation and phase accumulation from the measured
/// per-bin phase advance.
pub fn time_stretch(w: &Waveform, rate: f64) -> Result<Waveform> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "time_stretch rate must be positive, got {rate}"
        )));
    }
    let out_len = (w.len() as f64 / rate).round() as usize;
    if w.is_empty() || out_len == 0 {
        return Waveform::new(Vec::new(), w.sample_rate());
    }

    let params = StftParams::default();
    let spec = stft(w, params)?;
    let n_bins = spec.n_bins();
    let n_in = spec.n_frames();

    let mut steps = Vec::new();
    let mut t = 0.0;
    while t < n_in as f64 {
        steps.push(t);
        t += rate;
    }

    // Expected phase advance per hop for each bin.
    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * std::f64::consts::PI * params.hop as f64 * k as f64 / params.n_fft as f64)
        .collect();

    let frame = |t: usize, k: usize| -> Complex<f64> {
        if t < n_in {
            spec.data()[[t, k]]
        } else {
            Complex::new(0.0, 0.0)
        }
    };

    let mut out = Array2::zeros((steps.len(), n_bins));
    let mut phase: Vec<f64> = (0..n_bins).map(|k| spec.data()[[0, k]].arg()).collect();
    for (i, &pos) in steps.iter().enumerate() {
        let t0 = pos.floor() as usize;
        let alpha = pos - t0 as f64;
        for k in 0..n_bins {
            let c0 = frame(t0, k);
            let c1 = frame(t0 + 1, k);
            let mag = (1.0 - alpha) * c0.norm() + alpha * c1.norm();
            out[[i, k]] = Complex::from_polar(mag, phase[k]);
            let mut dphi = c1.arg() - c0.arg() - advance[k];
            dphi -= 2.0 * std::f64::consts::PI * (dphi / (2.0 * std::f64::consts::PI)).round();
            phase[k] += advance[k] + dphi;
        }
    }

    let stretched = Spectrogram {
        data: out,
        params,
        sample_rate: w.sample_rate(),
        n_samples: out_len,
    };
    istft(&stretched)
}

/// Shift pitch by `semitones` while preserving length exactly.
///
/// Stretches time by `1 / 2^(semitones/12)`, then resamples the result back
/// to the original sample count, which scales all frequencies by
/// `2^(semitones/12)`.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform> {
    if !semitones.is_finite() || semitones.abs() > 12.0 {
        return Err(Error::InvalidInput(format!(
            "pitch_shift semitones must lie in [-12, 12], got {semitones}"
        )));
    }
    if w.is_empty() {
        return Ok(w.clone());
    }
    let factor = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(w, 1.0 / factor)?;
    if stretched.is_empty() {
        return Waveform::new(vec![0.0; w.len()], w.sample_rate());
    }
    let ratio = w.len() as f64 / stretched.len() as f64;
    let out = sinc_resample_to_len(&stretched.samples_f64(), ratio, w.len());
    Waveform::new(out.into_iter().map(|v| v as f32).collect(), w.sample_rate())
}
