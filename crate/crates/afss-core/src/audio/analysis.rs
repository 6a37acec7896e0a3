//! Whole-signal spectral measurements used to verify transforms.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::stft::hann_window;
use crate::audio::Waveform;

/// Hann-windowed power spectrum of the full signal, bins `0..=n/2`.
fn periodogram(w: &Waveform) -> Vec<f64> {
    let n = w.len();
    if n == 0 {
        return vec![0.0];
    }
    let window = hann_window(n);
    let mut buf: Vec<Complex<f64>> = w
        .samples
        .iter()
        .zip(&window)
        .map(|(&s, &h)| Complex::new(s as f64 * h, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn bin_hz(w: &Waveform) -> f64 {
    w.sample_rate as f64 / w.len().max(1) as f64
}

/// Frequency of the strongest spectral peak, refined by parabolic
/// interpolation on log power. Returns 0.0 for empty or silent input.
pub fn dominant_frequency(w: &Waveform) -> f64 {
    let p = periodogram(w);
    if p.len() < 3 {
        return 0.0;
    }
    let (k, &pk) = p
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if pk <= 0.0 {
        return 0.0;
    }
    let delta = if k > 0 && k + 1 < p.len() && p[k - 1] > 0.0 && p[k + 1] > 0.0 {
        let (a, b, c) = (p[k - 1].ln(), p[k].ln(), p[k + 1].ln());
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-12 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    (k as f64 + delta) * bin_hz(w)
}

/// Mean power in `[f_lo, f_hi]` Hz, in dB. Returns -300.0 when the band is
/// empty or silent.
pub fn band_power_db(w: &Waveform, f_lo: f64, f_hi: f64) -> f64 {
    let p = periodogram(w);
    let hz = bin_hz(w);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, &v) in p.iter().enumerate() {
        let f = k as f64 * hz;
        if f >= f_lo && f <= f_hi {
            sum += v;
            count += 1;
        }
    }
    if count == 0 || sum <= 0.0 {
        return -300.0;
    }
    10.0 * (sum / count as f64).log10()
}

/// Level of the `k`-th harmonic of `f0` relative to the fundamental, in dB.
/// Each component is measured as the peak power within half a fundamental
/// of its nominal frequency.
pub fn harmonic_level_dbc(w: &Waveform, f0: f64, k: usize) -> f64 {
    let half = f0 / 2.0;
    let fundamental = peak_power_near(w, f0, half);
    let harmonic = peak_power_near(w, k as f64 * f0, half);
    if fundamental <= 0.0 {
        return 0.0;
    }
    if harmonic <= 0.0 {
        return -300.0;
    }
    10.0 * (harmonic / fundamental).log10()
}

fn peak_power_near(w: &Waveform, f: f64, half_width: f64) -> f64 {
    let p = periodogram(w);
    let hz = bin_hz(w);
    let lo = (((f - half_width) / hz).floor().max(0.0)) as usize;
    let hi = ((((f + half_width) / hz).ceil()) as usize).min(p.len().saturating_sub(1));
    if lo > hi {
        return 0.0;
    }
    p[lo..=hi].iter().fold(0.0f64, |m, &v| m.max(v))
}
