//! RawBoost-style channel and noise degradations: convolutive multi-band
//! notch filtering, signal-dependent impulsive noise, and colored additive
//! noise at a drawn SNR, applied in that fixed order.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// The three RawBoost degradation algorithms.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RawBoostAlgo {
    Convolutive,
    Impulsive,
    Additive,
}

/// Parameter ranges for the RawBoost stages.
///
/// Defaults follow the published RawBoost settings: 5 notch bands over
/// 20-8000 Hz with 100-1000 Hz widths, 10-100 filter coefficients,
/// 10-40 dB attenuation, additive noise at 10-40 dB SNR, and up to 10% of
/// samples hit by impulses when the impulsive stage is enabled. The default
/// algorithm set is convolutive + additive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawBoostConfig {
    pub n_bands: usize,
    pub min_f: f64,
    pub max_f: f64,
    pub min_bw: f64,
    pub max_bw: f64,
    pub min_coeff: usize,
    pub max_coeff: usize,
    pub min_g: f64,
    pub max_g: f64,
    pub min_bias_lin: f64,
    pub max_bias_lin: f64,
    pub snr_min: f64,
    pub snr_max: f64,
    pub window_w: usize,
    pub p_percent: f64,
    pub g_sd: f64,
    pub algo_set: BTreeSet<RawBoostAlgo>,
}

impl Default for RawBoostConfig {
    fn default() -> Self {
        RawBoostConfig {
            n_bands: 5,
            min_f: 20.0,
            max_f: 8000.0,
            min_bw: 100.0,
            max_bw: 1000.0,
            min_coeff: 10,
            max_coeff: 100,
            min_g: 10.0,
            max_g: 40.0,
            min_bias_lin: 5.0,
            max_bias_lin: 20.0,
            snr_min: 10.0,
            snr_max: 40.0,
            window_w: 64,
            p_percent: 10.0,
            g_sd: 2.0,
            algo_set: BTreeSet::from([RawBoostAlgo::Convolutive, RawBoostAlgo::Additive]),
        }
    }
}

impl RawBoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bands == 0 {
            return Err(Error::Config("rawboost n_bands must be >= 1".into()));
        }
        for (name, lo, hi) in [
            ("f", self.min_f, self.max_f),
            ("bw", self.min_bw, self.max_bw),
            ("g", self.min_g, self.max_g),
            ("bias_lin", self.min_bias_lin, self.max_bias_lin),
            ("snr", self.snr_min, self.snr_max),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!(
                    "rawboost {name} range [{lo}, {hi}] is invalid"
                )));
            }
        }
        if self.min_f <= 0.0 {
            return Err(Error::Config("rawboost min_f must be > 0".into()));
        }
        if self.min_bw <= 0.0 {
            return Err(Error::Config("rawboost min_bw must be > 0".into()));
        }
        if self.min_coeff < 3 || self.min_coeff > self.max_coeff {
            return Err(Error::Config(
                "rawboost coefficient range must satisfy 3 <= min_coeff <= max_coeff".into(),
            ));
        }
        if !(0.0..=100.0).contains(&self.p_percent) {
            return Err(Error::Config("rawboost p_percent must be in [0, 100]".into()));
        }
        if self.g_sd < 0.0 {
            return Err(Error::Config("rawboost g_sd must be >= 0".into()));
        }
        if self.window_w == 0 {
            return Err(Error::Config("rawboost window_w must be >= 1".into()));
        }
        Ok(())
    }
}

/// One drawn notch filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotchDraw {
    pub center_hz: f64,
    pub width_hz: f64,
    pub n_coeff: usize,
    pub atten_db: f64,
}

/// Drawn impulsive-noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulsiveDraw {
    pub fraction: f64,
    pub n_corrupted: usize,
}

/// Drawn additive-noise parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveDraw {
    pub snr_db: f64,
    pub notches: Vec<NotchDraw>,
    /// True when the stage was skipped because the input had zero power.
    pub skipped: bool,
}

/// Everything RawBoost drew for one application, in application order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBoostDraw {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convolutive: Option<Vec<NotchDraw>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impulsive: Option<ImpulsiveDraw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive: Option<AdditiveDraw>,
}

/// Apply the enabled RawBoost algorithms in fixed order convolutive →
/// impulsive → additive, then rescale to [-1, 1] only if the result clips.
pub fn rawboost(w: &Waveform, cfg: &RawBoostConfig, rng: &mut impl Rng) -> Result<Waveform> {
    rawboost_detailed(w, cfg, rng).map(|(out, _)| out)
}

/// [`rawboost`] that also reports the drawn parameters.
pub fn rawboost_detailed(
    w: &Waveform,
    cfg: &RawBoostConfig,
    rng: &mut impl Rng,
) -> Result<(Waveform, RawBoostDraw)> {
    cfg.validate()?;
    let rate = w.sample_rate();
    let mut y = w.samples_f64();
    let mut draw = RawBoostDraw::default();

    if cfg.algo_set.contains(&RawBoostAlgo::Convolutive) {
        let notches = draw_notches(cfg, rate, rng);
        for notch in &notches {
            let h = notch_fir(notch, rate);
            y = convolve_same(&y, &h);
        }
        draw.convolutive = Some(notches);
    }

    if cfg.algo_set.contains(&RawBoostAlgo::Impulsive) {
        let fraction = rng.random_range(0.0..=cfg.p_percent) / 100.0;
        let n_corrupted = (fraction * y.len() as f64).round() as usize;
        for _ in 0..n_corrupted {
            let pos = rng.random_range(0..y.len().max(1));
            if pos < y.len() {
                let r1: f64 = rng.random_range(-1.0..1.0);
                let r2: f64 = rng.random_range(-1.0..1.0);
                y[pos] += cfg.g_sd * y[pos] * r1 * r2;
            }
        }
        draw.impulsive = Some(ImpulsiveDraw {
            fraction,
            n_corrupted,
        });
    }

    if cfg.algo_set.contains(&RawBoostAlgo::Additive) {
        let snr_db = rng.random_range(cfg.snr_min..=cfg.snr_max);
        let notches = draw_notches(cfg, rate, rng);
        let p_sig = mean_power(&y);
        if p_sig > 0.0 && !y.is_empty() {
            let mut noise: Vec<f64> = (0..y.len()).map(|_| gaussian(rng)).collect();
            for notch in &notches {
                let h = notch_fir(notch, rate);
                noise = convolve_same(&noise, &h);
            }
            let p_noise = mean_power(&noise);
            if p_noise > 0.0 {
                let scale = (p_sig / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
                for (s, n) in y.iter_mut().zip(&noise) {
                    *s += scale * n;
                }
            }
            draw.additive = Some(AdditiveDraw {
                snr_db,
                notches,
                skipped: false,
            });
        } else {
            draw.additive = Some(AdditiveDraw {
                snr_db,
                notches,
                skipped: true,
            });
        }
    }

    let peak = y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 1.0 {
        for s in &mut y {
            *s /= peak;
        }
    }

    let out = Waveform::new(y.into_iter().map(|v| v as f32).collect(), rate)?;
    Ok((out, draw))
}

fn draw_notches(cfg: &RawBoostConfig, rate: u32, rng: &mut impl Rng) -> Vec<NotchDraw> {
    (0..cfg.n_bands)
        .map(|_| {
            let center_hz = rng.random_range(cfg.min_f..=cfg.max_f.min(rate as f64 / 2.0));
            let width_hz = rng.random_range(cfg.min_bw..=cfg.max_bw);
            let mut n_coeff = rng.random_range(cfg.min_coeff..=cfg.max_coeff);
            if n_coeff % 2 == 0 {
                n_coeff += 1;
            }
            let atten_db = rng.random_range(cfg.min_g..=cfg.max_g);
            NotchDraw {
                center_hz,
                width_hz,
                n_coeff,
                atten_db,
            }
        })
        .collect()
}

/// Linear-phase notch FIR: identity minus a windowed-sinc band-pass whose
/// gain at the notch center is normalized to 1, scaled so the response at
/// the center drops by exactly `atten_db`.
fn notch_fir(notch: &NotchDraw, rate: u32) -> Vec<f64> {
    let rate = rate as f64;
    let n = notch.n_coeff;
    let m = (n - 1) / 2;
    let f1 = ((notch.center_hz - notch.width_hz / 2.0).max(1.0)) / rate;
    let f2 = ((notch.center_hz + notch.width_hz / 2.0).min(rate / 2.0 - 1.0)) / rate;

    let mut bp: Vec<f64> = (0..n)
        .map(|k| {
            let d = k as f64 - m as f64;
            let taper = if n > 1 {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
            } else {
                1.0
            };
            (2.0 * f2 * sinc(2.0 * f2 * d) - 2.0 * f1 * sinc(2.0 * f1 * d)) * taper
        })
        .collect();

    // Normalize the band-pass to unit gain at the center frequency.
    let fc = notch.center_hz / rate;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &h) in bp.iter().enumerate() {
        let phi = 2.0 * std::f64::consts::PI * fc * k as f64;
        re += h * phi.cos();
        im -= h * phi.sin();
    }
    let gain = (re * re + im * im).sqrt();
    if gain > 1e-9 {
        for h in &mut bp {
            *h /= gain;
        }
    }

    let depth = 1.0 - 10f64.powf(-notch.atten_db / 20.0);
    let mut h: Vec<f64> = bp.iter().map(|&v| -depth * v).collect();
    h[m] += 1.0;
    h
}

/// "Same" convolution: output aligned to the input by the filter's group
/// delay, truncated to the input length.
fn convolve_same(x: &[f64], h: &[f64]) -> Vec<f64> {
    let m = (h.len() - 1) / 2;
    let mut out = vec![0.0; x.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &hk) in h.iter().enumerate() {
            let j = i as i64 - k as i64 + m as i64;
            if j >= 0 && (j as usize) < x.len() {
                acc += hk * x[j as usize];
            }
        }
        *o = acc;
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

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|&v| v * v).sum::<f64>() / x.len() as f64
}
