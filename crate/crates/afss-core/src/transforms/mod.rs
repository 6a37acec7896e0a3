//! The acoustic transformation suite: pitch shift, time stretch, tanh
//! distortion, and RawBoost, with intensity presets and uniform random
//! per-sample selection.

mod distortion;
mod pitch;
mod preset;
mod rawboost;

pub use distortion::tanh_distortion;
pub use pitch::{pitch_shift, time_stretch};
pub use preset::{IntensityPreset, Interval};
pub use rawboost::{
    rawboost, rawboost_detailed, AdditiveDraw, ImpulsiveDraw, NotchDraw, RawBoostAlgo,
    RawBoostConfig, RawBoostDraw,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// The four supported transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    PitchShift,
    TimeStretch,
    TanhDistortion,
    RawBoost,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] = [
        TransformKind::PitchShift,
        TransformKind::TimeStretch,
        TransformKind::TanhDistortion,
        TransformKind::RawBoost,
    ];
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TransformKind::PitchShift => "pitch_shift",
            TransformKind::TimeStretch => "time_stretch",
            TransformKind::TanhDistortion => "tanh_distortion",
            TransformKind::RawBoost => "raw_boost",
        };
        f.write_str(name)
    }
}

/// A transform choice with its scalar parameter already drawn.
///
/// RawBoost draws its many parameters at application time from the same
/// stream, so it carries none here.
#[derive(Debug, Clone, PartialEq)]
pub enum SampledTransform {
    PitchShift { semitones: f64 },
    TimeStretch { rate: f64 },
    TanhDistortion { amount: f64 },
    RawBoost,
}

impl SampledTransform {
    pub fn kind(&self) -> TransformKind {
        match self {
            SampledTransform::PitchShift { .. } => TransformKind::PitchShift,
            SampledTransform::TimeStretch { .. } => TransformKind::TimeStretch,
            SampledTransform::TanhDistortion { .. } => TransformKind::TanhDistortion,
            SampledTransform::RawBoost => TransformKind::RawBoost,
        }
    }
}

/// The record of one applied transform: kind plus every concrete parameter,
/// as stored in manifest transform logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppliedTransform {
    PitchShift { semitones: f64 },
    TimeStretch { rate: f64 },
    TanhDistortion { amount: f64 },
    RawBoost { draw: RawBoostDraw },
}

impl AppliedTransform {
    pub fn kind(&self) -> TransformKind {
        match self {
            AppliedTransform::PitchShift { .. } => TransformKind::PitchShift,
            AppliedTransform::TimeStretch { .. } => TransformKind::TimeStretch,
            AppliedTransform::TanhDistortion { .. } => TransformKind::TanhDistortion,
            AppliedTransform::RawBoost { .. } => TransformKind::RawBoost,
        }
    }
}

/// Draw a transform kind uniformly from `pool` and its scalar parameter
/// uniformly from the preset's interval for that kind.
pub fn sample_transform(
    pool: &[TransformKind],
    preset: &IntensityPreset,
    rng: &mut impl Rng,
) -> Result<SampledTransform> {
    if pool.is_empty() {
        return Err(Error::InvalidInput(
            "sample_transform needs a non-empty kind pool".into(),
        ));
    }
    preset.validate()?;
    let kind = pool[rng.random_range(0..pool.len())];
    Ok(match kind {
        TransformKind::PitchShift => SampledTransform::PitchShift {
            semitones: preset.pitch_shift_semitones.sample(rng),
        },
        TransformKind::TimeStretch => SampledTransform::TimeStretch {
            rate: preset.time_stretch_rate.sample(rng),
        },
        TransformKind::TanhDistortion => SampledTransform::TanhDistortion {
            amount: preset.tanh_distortion_amount.sample(rng),
        },
        TransformKind::RawBoost => SampledTransform::RawBoost,
    })
}

/// Execute a sampled transform, returning the output and the log record of
/// what was actually applied.
pub fn apply_transform(
    w: &Waveform,
    sampled: &SampledTransform,
    preset: &IntensityPreset,
    rng: &mut impl Rng,
) -> Result<(Waveform, AppliedTransform)> {
    Ok(match *sampled {
        SampledTransform::PitchShift { semitones } => (
            pitch_shift(w, semitones)?,
            AppliedTransform::PitchShift { semitones },
        ),
        SampledTransform::TimeStretch { rate } => (
            time_stretch(w, rate)?,
            AppliedTransform::TimeStretch { rate },
        ),
        SampledTransform::TanhDistortion { amount } => (
            tanh_distortion(w, amount)?,
            AppliedTransform::TanhDistortion { amount },
        ),
        SampledTransform::RawBoost => {
            let (out, draw) = rawboost_detailed(w, &preset.rawboost, rng)?;
            (out, AppliedTransform::RawBoost { draw })
        }
    })
}
