use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Zero crossings kept on each side of the sinc kernel.
const KERNEL_CROSSINGS: f64 = 32.0;

/// Band-limited sample rate conversion with a Hann-windowed sinc kernel.
///
/// Returns a clone when `target_rate == w.sample_rate()`. Otherwise the
/// output has exactly `round(n * target / source)` samples. The kernel
/// cutoff is `min(1, ratio)` of the input Nyquist, so downsampling is
/// anti-aliased.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::InvalidInput("target_rate must be > 0".into()));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let ratio = target_rate as f64 / w.sample_rate as f64;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let out = sinc_resample_to_len(&w.samples_f64(), ratio, out_len);
    Waveform::new(out.into_iter().map(|v| v as f32).collect(), target_rate)
}

/// Evaluate a windowed-sinc reconstruction of `x` at `out_len` points
/// spaced `1 / ratio` input samples apart, starting at input position 0.
pub(crate) fn sinc_resample_to_len(x: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let cutoff = ratio.min(1.0);
    let radius = KERNEL_CROSSINGS / cutoff;
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let t = m as f64 / ratio;
        let lo = ((t - radius).ceil() as i64).max(0);
        let hi = ((t + radius).floor() as i64).min(x.len() as i64 - 1);
        let mut acc = 0.0;
        for k in lo..=hi {
            let d = t - k as f64;
            acc += x[k as usize] * cutoff * sinc(cutoff * d) * hann_taper(d / radius);
        }
        out.push(acc);
    }
    out
}

fn sinc(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        1.0
    } else {
        let pv = std::f64::consts::PI * v;
        pv.sin() / pv
    }
}

fn hann_taper(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * u).cos())
    }
}
