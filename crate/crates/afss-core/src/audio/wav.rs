use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Read a WAV file into a mono [`Waveform`].
///
/// Accepts 8/16/24/32-bit integer PCM and 32-bit float. Multichannel input
/// is downmixed by averaging channels. Integer samples are scaled by the
/// type's full-scale negative magnitude (e.g. 1/32768 for 16-bit), so the
/// result lies in `[-1, 1]`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader =
        WavReader::open(path).map_err(|e| wav_err(path, format!("cannot open: {e}")))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(wav_err(path, "zero channels".into()));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e.to_string()))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_err(path, e.to_string()))?
        }
        (fmt, bits) => {
            return Err(wav_err(path, format!("unsupported format {fmt:?}/{bits}-bit")));
        }
    };

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };

    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as 16-bit PCM mono WAV.
///
/// Samples are clamped to `[-1, 1]`, then quantized as
/// `clamp(round(x * 32768), -32768, 32767)`. The load/save round trip
/// therefore reproduces each in-range sample to within `2^-15`.
pub fn save_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer =
        WavWriter::create(path, spec).map_err(|e| wav_err(path, format!("cannot create: {e}")))?;
    for &s in &w.samples {
        let clamped = s.clamp(-1.0, 1.0);
        let q = (clamped as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| wav_err(path, e.to_string()))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e.to_string()))?;
    Ok(())
}

fn wav_err(path: &Path, detail: String) -> Error {
    Error::WavFormat {
        path: path.to_path_buf(),
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        (dir, p)
    }

    #[test]
    fn round_trip_within_quantization_error() {
        let n = 1600;
        let samples: Vec<f32> = (0..n)
            .map(|i| (0.9 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin()) as f32)
            .collect();
        let w = Waveform::new(samples.clone(), 16_000).unwrap();
        let (_d, path) = tmp("rt.wav");
        save_wav(&path, &w).unwrap();
        let r = load_wav(&path).unwrap();
        assert_eq!(r.sample_rate(), 16_000);
        assert_eq!(r.len(), n);
        let tol = 2f32.powi(-15) + 1e-9;
        for (a, b) in samples.iter().zip(r.samples()) {
            assert!((a - b).abs() <= tol, "|{a} - {b}| > {tol}");
        }
    }

    #[test]
    fn save_clamps_out_of_range() {
        let w = Waveform::new(vec![1.5, -2.0, 0.0], 16_000).unwrap();
        let (_d, path) = tmp("clamp.wav");
        save_wav(&path, &w).unwrap();
        let r = load_wav(&path).unwrap();
        assert!((r.samples()[0] - 32767.0 / 32768.0).abs() < 1e-6);
        assert!((r.samples()[1] + 1.0).abs() < 1e-6);
        assert_eq!(r.samples()[2], 0.0);
    }

    #[test]
    fn stereo_downmixes_by_averaging() {
        let (_d, path) = tmp("stereo.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut writer = WavWriter::create(&path, spec).unwrap();
        // Frames: (0.5, -0.5) -> 0.0 and (0.25, 0.25) -> 0.25, in 16-bit units.
        for v in [16384i16, -16384, 8192, 8192] {
            writer.write_sample(v).unwrap();
        }
        writer.finalize().unwrap();
        let r = load_wav(&path).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.samples()[0].abs() < 1e-6);
        assert!((r.samples()[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn float_wav_loads() {
        let (_d, path) = tmp("float.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut writer = WavWriter::create(&path, spec).unwrap();
        for v in [0.1f32, -0.2, 0.3] {
            writer.write_sample(v).unwrap();
        }
        writer.finalize().unwrap();
        let r = load_wav(&path).unwrap();
        assert_eq!(r.samples(), &[0.1, -0.2, 0.3]);
    }

    #[test]
    fn eight_bit_pcm_loads() {
        let (_d, path) = tmp("u8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut writer = WavWriter::create(&path, spec).unwrap();
        for v in [0i8, 64, -128] {
            writer.write_sample(v).unwrap();
        }
        writer.finalize().unwrap();
        let r = load_wav(&path).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.samples()[0], 0.0);
        assert!((r.samples()[1] - 0.5).abs() < 1e-6);
        assert!((r.samples()[2] + 1.0).abs() < 1e-6);
    }
}
