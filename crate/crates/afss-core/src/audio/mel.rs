use ndarray::Array2;

use crate::audio::stft::{stft, StftParams};
use crate::audio::Waveform;
use crate::error::{Error, Result};

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / LOG_STEP
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (LOG_STEP * (mel - MIN_LOG_MEL)).exp()
    }
}

const LOG_STEP: f64 = 0.06875177742094912; // ln(6.4) / 27

/// Mel-domain magnitudes, `[n_frames, n_mels]`, with enough context to be
/// inverted back to audio.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    pub(crate) data: Array2<f64>,
    pub(crate) params: StftParams,
    pub(crate) n_mels: usize,
    pub(crate) sample_rate: u32,
    pub(crate) n_samples: usize,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// `ln(mel + eps)`, the detector front-end's input domain.
    pub fn log_data(&self, eps: f64) -> Array2<f64> {
        self.data.mapv(|v| (v + eps).ln())
    }
}

/// Slaney-style triangular mel filterbank, `[n_mels, n_fft/2 + 1]`.
///
/// Filters span 0 Hz to Nyquist on the mel scale (linear below 1 kHz,
/// logarithmic above) and each triangle is area-normalized by
/// `2 / (f_hi - f_lo)`.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Array2<f64>> {
    if n_mels == 0 {
        return Err(Error::Config("n_mels must be > 0".into()));
    }
    if n_fft < 2 || n_fft % 2 != 0 {
        return Err(Error::Config(format!(
            "n_fft must be even and >= 2, got {n_fft}"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let f_max = sample_rate as f64 / 2.0;

    let mel_max = hz_to_mel(f_max);
    let hz_pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let fft_freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect();

    let mut fb = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, mid, hi) = (hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]);
        let enorm = 2.0 / (hi - lo);
        for (k, &f) in fft_freqs.iter().enumerate() {
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            let w = rising.min(falling).max(0.0);
            fb[[m, k]] = w * enorm;
        }
    }
    Ok(fb)
}

/// STFT magnitude projected through the mel filterbank.
pub fn mel_encode(w: &Waveform, params: StftParams, n_mels: usize) -> Result<MelSpectrogram> {
    let spec = stft(w, params)?;
    let fb = mel_filterbank(n_mels, params.n_fft, w.sample_rate())?;
    let data = spec.magnitude().dot(&fb.t());
    Ok(MelSpectrogram {
        data,
        params,
        n_mels,
        sample_rate: w.sample_rate(),
        n_samples: w.len(),
    })
}

/// Least-norm linear-magnitude estimate from mel magnitudes.
///
/// Solves `S = M (F F^T)^-1 F` through a Cholesky factorization of the
/// `n_mels x n_mels` Gram matrix, then clamps negatives to zero. Before
/// clamping the solution reproduces the input exactly: `S F^T = M`.
pub fn mel_to_linear(mel: &MelSpectrogram) -> Result<Array2<f64>> {
    let mut s = least_norm_linear(mel)?;
    s.mapv_inplace(|v| v.max(0.0));
    Ok(s)
}

fn least_norm_linear(mel: &MelSpectrogram) -> Result<Array2<f64>> {
    let fb = mel_filterbank(mel.n_mels, mel.params.n_fft, mel.sample_rate)?;
    let gram = fb.dot(&fb.t());
    let chol = cholesky(&gram)?;
    // X solves (F F^T) X = F, one column at a time.
    let n_bins = fb.ncols();
    let n_mels = mel.n_mels;
    let mut x = Array2::zeros((n_mels, n_bins));
    let mut col = vec![0.0; n_mels];
    for j in 0..n_bins {
        for i in 0..n_mels {
            col[i] = fb[[i, j]];
        }
        let sol = chol_solve(&chol, &col);
        for i in 0..n_mels {
            x[[i, j]] = sol[i];
        }
    }
    Ok(mel.data.dot(&x))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// with a tiny ridge for numerical headroom.
fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput("cholesky needs a square matrix".into()));
    }
    let ridge = 1e-12 * a.diag().iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            if i == j {
                sum += ridge;
            }
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::InvalidInput(
                        "matrix is not positive definite".into(),
                    ));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

fn chol_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}
