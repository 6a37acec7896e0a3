use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::rawboost::RawBoostConfig;

/// Closed real interval, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::Config(format!(
                "interval {name} = [{}, {}] is not a valid closed interval",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn covers(&self, inner: &Interval) -> bool {
        self.lo <= inner.lo && inner.hi <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Uniform draw from the closed interval.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    /// Same midpoint, width scaled by `mult`, clamped to `[min, max]`.
    fn scaled(&self, mult: f64, min: f64, max: f64) -> Interval {
        let half = 0.5 * (self.hi - self.lo) * mult;
        let mid = self.mid();
        Interval {
            lo: (mid - half).max(min),
            hi: (mid + half).min(max),
        }
    }
}

/// Parameter ranges for one transformation intensity level.
///
/// Level 1 is the reference setting: TimeStretch [0.9, 1.1], TanhDistortion
/// [0.15, 0.6], PitchShift [-0.5, 0.5] semitones, RawBoost with convolutive
/// and additive noise. Level 0 shrinks each interval to 25% of the level-1
/// width around the same midpoint; levels 2 and 3 widen it 2x and 3x,
/// clamped to each parameter's valid range. Wider levels therefore always
/// contain narrower ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityPreset {
    pub level: u8,
    pub pitch_shift_semitones: Interval,
    pub time_stretch_rate: Interval,
    pub tanh_distortion_amount: Interval,
    pub rawboost: RawBoostConfig,
}

impl IntensityPreset {
    /// The built-in preset for `level` in 0..=3.
    pub fn level(level: u8) -> Result<Self> {
        if level > 3 {
            return Err(Error::Config(format!(
                "intensity level must be 0..=3, got {level}"
            )));
        }
        let pitch = Interval::new(-0.5, 0.5);
        let stretch = Interval::new(0.9, 1.1);
        let tanh = Interval::new(0.15, 0.6);
        let (p, s, t) = match level {
            1 => (pitch, stretch, tanh),
            _ => {
                let mult = match level {
                    0 => 0.25,
                    2 => 2.0,
                    _ => 3.0,
                };
                (
                    pitch.scaled(mult, -12.0, 12.0),
                    stretch.scaled(mult, 0.05, 10.0),
                    tanh.scaled(mult, 0.0, 1.0),
                )
            }
        };
        Ok(IntensityPreset {
            level,
            pitch_shift_semitones: p,
            time_stretch_rate: s,
            tanh_distortion_amount: t,
            rawboost: RawBoostConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.level > 3 {
            return Err(Error::Config(format!(
                "intensity level must be 0..=3, got {}",
                self.level
            )));
        }
        self.pitch_shift_semitones.validate("pitch_shift_semitones")?;
        self.time_stretch_rate.validate("time_stretch_rate")?;
        self.tanh_distortion_amount.validate("tanh_distortion_amount")?;
        if self.pitch_shift_semitones.lo < -12.0 || self.pitch_shift_semitones.hi > 12.0 {
            return Err(Error::Config(
                "pitch_shift_semitones must lie within [-12, 12]".into(),
            ));
        }
        if self.time_stretch_rate.lo <= 0.0 {
            return Err(Error::Config("time_stretch_rate must be positive".into()));
        }
        if self.tanh_distortion_amount.lo < 0.0 || self.tanh_distortion_amount.hi > 1.0 {
            return Err(Error::Config(
                "tanh_distortion_amount must lie within [0, 1]".into(),
            ));
        }
        self.rawboost.validate()
    }

    /// True when every interval of `inner` lies within the matching interval
    /// of `self`.
    pub fn covers(&self, inner: &IntensityPreset) -> bool {
        self.pitch_shift_semitones.covers(&inner.pitch_shift_semitones)
            && self.time_stretch_rate.covers(&inner.time_stretch_rate)
            && self.tanh_distortion_amount.covers(&inner.tanh_distortion_amount)
    }
}
