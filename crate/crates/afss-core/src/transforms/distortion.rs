use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Soft-clipping distortion: `y = tanh(g * x)` with drive `g = 10^(2 *
/// amount)`, then RMS renormalization back to the input level.
///
/// `amount = 0` gives unit drive, which is near-identity for small signals;
/// `amount = 1` drives at 100x. Length and sample rate are unchanged, and
/// output RMS equals input RMS (silent input stays silent).
pub fn tanh_distortion(w: &Waveform, amount: f64) -> Result<Waveform> {
    if !amount.is_finite() || !(0.0..=1.0).contains(&amount) {
        return Err(Error::InvalidInput(format!(
            "tanh_distortion amount must lie in [0, 1], got {amount}"
        )));
    }
    let g = 10f64.powf(2.0 * amount);
    let mut y: Vec<f64> = w.samples().iter().map(|&x| (g * x as f64).tanh()).collect();

    let in_rms = w.rms();
    let out_rms = if y.is_empty() {
        0.0
    } else {
        (y.iter().map(|&v| v * v).sum::<f64>() / y.len() as f64).sqrt()
    };
    if in_rms > 0.0 && out_rms > 0.0 {
        let scale = in_rms / out_rms;
        for v in &mut y {
            *v *= scale;
        }
    }
    Waveform::new(y.into_iter().map(|v| v as f32).collect(), w.sample_rate())
}
