//! Acceptance suite: ten gate criteria for the pipeline, one test each,
//! printing one PASS/FAIL line per criterion (run with `--nocapture` to see
//! the lines on success). Oracles here are written independently of the
//! library implementations they check.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::{Path, PathBuf};

use afss_core::audio::{band_power_db, dominant_frequency, StftParams, Waveform};
use afss_core::commands::cmd_synthesize;
use afss_core::config::{ExperimentConfig, VcSpec, VocoderSpec};
use afss_core::detector::{DetectorSpec, ToyFrontEndConfig};
use afss_core::fixtures::{write_toy_corpus, ToyCorpusSpec};
use afss_core::manifest::{read_manifest, write_manifest, Label, Provenance, SampleRecord};
use afss_core::metrics::{
    auc, average_precision, eer, score_manifest, ScoreEntry, ScoreSet,
};
use afss_core::rng::RngStream;
use afss_core::synthesis::{
    generate_corpus, Backends, GenerateConfig, GriffinLimVocoder, IdentityVc, SynthesisMode,
};
use afss_core::training::{
    balanced_batches, batches_per_epoch, lr_at, reweighted_bce, train, ReweightingLossState,
    TrainConfig,
};
use afss_core::transforms::{
    pitch_shift, rawboost_detailed, time_stretch, IntensityPreset, RawBoostAlgo, RawBoostConfig,
    TransformKind,
};
use rand::Rng;

fn criterion(n: u32, what: &str, body: impl FnOnce() + UnwindSafe) {
    let outcome = catch_unwind(body);
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("acceptance criterion {n:2} [{what}]: {verdict}");
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
}

// ---------------------------------------------------------------- helpers

fn sine(freq: f64, n: usize) -> Waveform {
    let s: Vec<f32> = (0..n)
        .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin()) as f32)
        .collect();
    Waveform::new(s, 16_000).unwrap()
}

fn white_noise(n: usize, key: u64) -> Waveform {
    let mut rng = RngStream::for_sample(key, "acceptance-noise", "src");
    let s: Vec<f32> = (0..n).map(|_| rng.random_range(-0.5..0.5f32)).collect();
    Waveform::new(s, 16_000).unwrap()
}

fn toy_corpus(dir: &Path, n_speakers: usize, per_speaker: usize, secs: f64) -> PathBuf {
    let spec = ToyCorpusSpec {
        n_speakers,
        utterances_per_speaker: per_speaker,
        duration_secs: secs,
        seed: 7,
    };
    write_toy_corpus(dir, &spec).unwrap().0
}

fn cheap_backends() -> Backends {
    Backends {
        vc: Box::new(IdentityVc),
        vocoders: vec![Box::new(GriffinLimVocoder {
            n_mels: 40,
            iters: 8,
            ..GriffinLimVocoder::default()
        })],
    }
}

// --------------------------------------------------------- 1: loss values

#[test]
fn criterion_01_loss_correctness() {
    criterion(1, "loss closed forms and finite-difference gradients", || {
        let state = ReweightingLossState::default();
        let ln2 = std::f64::consts::LN_2;
        assert!((reweighted_bce(1, 0.5, &state).loss - 1.5 * ln2).abs() < 1e-9);
        assert!((reweighted_bce(0, 0.5, &state).loss - 0.5 * ln2).abs() < 1e-9);

        let mut rng = RngStream::for_sample(101, "acceptance1", "fd");
        let h = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
        for _ in 0..100 {
            let y: u8 = rng.random_range(0..=1);
            let p: f64 = rng.random_range(0.05..0.95);
            let s = ReweightingLossState {
                w_tilde_fake: rng.random_range(-3.0..3.0),
                w_tilde_real: rng.random_range(-3.0..3.0),
                ..Default::default()
            };
            let t = reweighted_bce(y, p, &s);

            let fd_p =
                (reweighted_bce(y, p + h, &s).loss - reweighted_bce(y, p - h, &s).loss) / (2.0 * h);
            assert!(rel(t.d_p, fd_p) <= 1e-4, "d_p: {} vs {fd_p}", t.d_p);

            let mut up = s;
            up.w_tilde_fake += h;
            let mut dn = s;
            dn.w_tilde_fake -= h;
            let fd_f = (reweighted_bce(y, p, &up).loss - reweighted_bce(y, p, &dn).loss) / (2.0 * h);
            assert!(
                rel(t.d_w_tilde_fake, fd_f) <= 1e-4 || (t.d_w_tilde_fake == 0.0 && fd_f == 0.0),
                "d_w_tilde_fake: {} vs {fd_f}",
                t.d_w_tilde_fake
            );

            let mut up = s;
            up.w_tilde_real += h;
            let mut dn = s;
            dn.w_tilde_real -= h;
            let fd_r = (reweighted_bce(y, p, &up).loss - reweighted_bce(y, p, &dn).loss) / (2.0 * h);
            assert!(
                rel(t.d_w_tilde_real, fd_r) <= 1e-4 || (t.d_w_tilde_real == 0.0 && fd_r == 0.0),
                "d_w_tilde_real: {} vs {fd_r}",
                t.d_w_tilde_real
            );
        }
    });
}

// -------------------------------------------------------- 2: weight bounds

#[test]
fn criterion_02_weight_bounds() {
    criterion(2, "class weights stay in (1,2) and (0,1) for any raw value", || {
        let mut rng = RngStream::for_sample(102, "acceptance2", "bounds");
        let mut raws: Vec<(f64, f64)> = (0..20_000)
            .map(|_| {
                (
                    rng.random_range(-100.0..=100.0),
                    rng.random_range(-100.0..=100.0),
                )
            })
            .collect();
        // The saturating corners are the hard cases; pin them explicitly.
        for a in [-100.0, 0.0, 100.0] {
            for b in [-100.0, 0.0, 100.0] {
                raws.push((a, b));
            }
        }
        for (wf_raw, wr_raw) in raws {
            let s = ReweightingLossState {
                w_tilde_fake: wf_raw,
                w_tilde_real: wr_raw,
                ..Default::default()
            };
            let wf = s.w_fake();
            let wr = s.w_real();
            assert!(wf > 1.0 && wf < 2.0, "w_fake {wf} at raw {wf_raw}");
            assert!(wr > 0.0 && wr < 1.0, "w_real {wr} at raw {wr_raw}");
            assert!(wf > wr, "ordering violated: {wf} vs {wr}");
        }
    });
}

// ---------------------------------------------------- 3: metric equivalence

/// Threshold-sweep EER: evaluate FAR/FRR at every candidate threshold and
/// linearly interpolate across the sign change of FAR - FRR.
fn eer_oracle(reals: &[f64], fakes: &[f64]) -> f64 {
    let mut ts: Vec<f64> = reals.iter().chain(fakes).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut points = vec![ts[0] - 1.0];
    points.extend_from_slice(&ts);
    points.push(ts[ts.len() - 1] + 1.0);

    let rates: Vec<(f64, f64)> = points
        .iter()
        .map(|&t| {
            let far = reals.iter().filter(|&&x| x >= t).count() as f64 / reals.len() as f64;
            let frr = fakes.iter().filter(|&&x| x < t).count() as f64 / fakes.len() as f64;
            (far, frr)
        })
        .collect();

    for i in 0..rates.len() {
        let (far, frr) = rates[i];
        let diff = far - frr;
        if diff == 0.0 {
            return far;
        }
        if i + 1 < rates.len() {
            let (nfar, nfrr) = rates[i + 1];
            let ndiff = nfar - nfrr;
            if diff > 0.0 && ndiff < 0.0 {
                let w = diff / (diff - ndiff);
                return far + (nfar - far) * w;
            }
        }
    }
    unreachable!("FAR starts at 1 and FRR ends at 1; a crossing must exist");
}

/// O(n^2) pairwise AUC: P(fake > real) + 0.5 P(tie).
fn auc_oracle(reals: &[f64], fakes: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &f in fakes {
        for &r in reals {
            if f > r {
                wins += 1.0;
            } else if f == r {
                wins += 0.5;
            }
        }
    }
    wins / (reals.len() as f64 * fakes.len() as f64)
}

/// Prefix-based AP over distinct descending thresholds.
fn ap_oracle(entries: &[(f64, bool)]) -> f64 {
    let n_fake = entries.iter().filter(|e| e.1).count() as f64;
    let mut ts: Vec<f64> = entries.iter().map(|e| e.0).collect();
    ts.sort_by(|a, b| f64::total_cmp(b, a));
    ts.dedup();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &ts {
        let prefix: Vec<&(f64, bool)> = entries.iter().filter(|e| e.0 >= t).collect();
        let tp = prefix.iter().filter(|e| e.1).count() as f64;
        let precision = tp / prefix.len() as f64;
        let recall = tp / n_fake;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

#[test]
fn criterion_03_metric_oracle_equivalence() {
    criterion(3, "eer/auc/ap match brute-force oracles on 1000 random sets", || {
        let mut rng = RngStream::for_sample(103, "acceptance3", "scores");
        for case in 0..1000 {
            let n_real = rng.random_range(1..=25usize);
            let n_fake = rng.random_range(1..=25usize);
            let quantize = rng.random_range(0.0..1.0f64) < 0.5;
            let mut draw = |_: usize| -> f64 {
                let s: f64 = rng.random_range(0.0..1.0);
                if quantize {
                    (s * 10.0).round() / 10.0
                } else {
                    s
                }
            };
            let reals: Vec<f64> = (0..n_real).map(&mut draw).collect();
            let fakes: Vec<f64> = (0..n_fake).map(&mut draw).collect();

            let mut entries = Vec::new();
            for (i, &s) in reals.iter().enumerate() {
                entries.push(ScoreEntry {
                    utterance_id: format!("r{i}"),
                    label: Label::Real,
                    score: s,
                });
            }
            for (i, &s) in fakes.iter().enumerate() {
                entries.push(ScoreEntry {
                    utterance_id: format!("f{i}"),
                    label: Label::Fake,
                    score: s,
                });
            }
            let set = ScoreSet::new(entries).unwrap();

            let (e, _) = eer(&set).unwrap();
            let e_oracle = eer_oracle(&reals, &fakes);
            assert!(
                (e - e_oracle).abs() <= 1e-9,
                "case {case}: eer {e} vs oracle {e_oracle}"
            );

            let a = auc(&set).unwrap();
            let a_oracle = auc_oracle(&reals, &fakes);
            assert!(
                (a - a_oracle).abs() <= 1e-9,
                "case {case}: auc {a} vs oracle {a_oracle}"
            );

            let pairs: Vec<(f64, bool)> = reals
                .iter()
                .map(|&s| (s, false))
                .chain(fakes.iter().map(|&s| (s, true)))
                .collect();
            let p = average_precision(&set).unwrap();
            let p_oracle = ap_oracle(&pairs);
            assert!(
                (p - p_oracle).abs() <= 1e-9,
                "case {case}: ap {p} vs oracle {p_oracle}"
            );
        }
    });
}

// ------------------------------------------------------ 4: sampler balance

#[test]
fn criterion_04_sampler_exactness() {
    criterion(4, "balanced batches are exactly half/half with floor count", || {
        let mut rng = RngStream::for_sample(104, "acceptance4", "configs");
        for _ in 0..20 {
            let batch_size = 2 * rng.random_range(1..=8usize);
            let half = batch_size / 2;
            let n_real = rng.random_range(half..=300usize);
            let n_fake = rng.random_range(half..=300usize);

            let mut labels = vec![Label::Real; n_real];
            labels.extend(vec![Label::Fake; n_fake]);

            let mut batch_rng = RngStream::for_sample(105, "acceptance4", "epoch");
            let batches = balanced_batches(&labels, batch_size, &mut batch_rng).unwrap();

            assert_eq!(
                batches.len(),
                n_real.min(n_fake) / half,
                "count formula violated for ({n_real}, {n_fake}, {batch_size})"
            );
            assert_eq!(batches.len(), batches_per_epoch(n_real, n_fake, batch_size));

            let mut seen = std::collections::HashSet::new();
            for batch in &batches {
                assert_eq!(batch.len(), batch_size);
                let reals = batch.iter().filter(|&&i| labels[i] == Label::Real).count();
                assert_eq!(reals, half, "batch is not half real");
                for &i in batch {
                    assert!(seen.insert(i), "index {i} repeated within the epoch");
                }
            }
        }
    });
}

// ------------------------------------------- 5: same-speaker, RawBoost-only

#[test]
fn criterion_05_same_speaker_constraint() {
    criterion(5, "fakes keep their source speaker; self_rec logs are RawBoost only", || {
        let dir = tempfile::tempdir().unwrap();
        let real_manifest = toy_corpus(dir.path(), 8, 5, 1.0);
        let reals = read_manifest(&real_manifest).unwrap();
        assert_eq!(reals.len(), 40);
        let speaker_of: BTreeMap<&str, &str> = reals
            .iter()
            .map(|r| (r.utterance_id.as_str(), r.speaker_id.as_str()))
            .collect();

        let out = tempfile::tempdir().unwrap();
        let cfg = GenerateConfig {
            mode: SynthesisMode::Afss,
            branch_ratio: 0.5,
            preset: IntensityPreset::level(1).unwrap(),
            seed: 11,
        };
        let corpus = generate_corpus(&real_manifest, out.path(), &cfg, &cheap_backends()).unwrap();
        assert_eq!(corpus.fakes.len(), 40);

        let mut saw_vc = false;
        let mut saw_rec = false;
        for fake in &corpus.fakes {
            let source = fake
                .utterance_id
                .rsplit_once('_')
                .expect("fake ids end in a provenance suffix")
                .0;
            assert_eq!(
                fake.speaker_id, speaker_of[source],
                "{} does not share its source's speaker",
                fake.utterance_id
            );
            assert_eq!(fake.label, Label::Fake);
            match fake.provenance {
                Provenance::SelfVc => {
                    saw_vc = true;
                    assert!(fake
                        .transform_log
                        .entries
                        .iter()
                        .all(|e| e.stage == "pre_vc"));
                }
                Provenance::SelfRec => {
                    saw_rec = true;
                    let kinds = fake.transform_log.kinds();
                    assert_eq!(
                        kinds,
                        vec![TransformKind::RawBoost],
                        "{} log is not exclusively RawBoost",
                        fake.utterance_id
                    );
                    assert!(fake
                        .transform_log
                        .entries
                        .iter()
                        .all(|e| e.stage == "post_rec"));
                }
                other => panic!("unexpected provenance {other:?} in afss mode"),
            }
        }
        assert!(saw_vc && saw_rec, "branch ratio 0.5 should produce both kinds");
    });
}

// -------------------------------------------------------- 6: transform physics

#[test]
fn criterion_06_transform_physics() {
    criterion(6, "pitch, stretch, and RawBoost hit their physical targets", || {
        // +12 semitones doubles the dominant frequency within one FFT bin.
        let tone = sine(440.0, 32_000);
        let shifted = pitch_shift(&tone, 12.0).unwrap();
        let bin_hz = 16_000.0 / StftParams::default().n_fft as f64;
        let f = dominant_frequency(&shifted);
        assert!((f - 880.0).abs() <= bin_hz, "dominant {f} Hz, want 880 ± {bin_hz}");

        // Stretching at rate 0.9 lengthens by 1/0.9 within one sample.
        let stretched = time_stretch(&tone, 0.9).unwrap();
        let want = (32_000.0f64 / 0.9).round();
        assert!(
            (stretched.len() as f64 - want).abs() <= 1.0,
            "stretched to {} samples, want {want} ± 1",
            stretched.len()
        );

        // Additive noise realizes its drawn SNR within 0.5 dB.
        let carrier = white_noise(32_000, 61);
        let add_cfg = RawBoostConfig {
            algo_set: [RawBoostAlgo::Additive].into_iter().collect(),
            ..RawBoostConfig::default()
        };
        for key in 0..5u64 {
            let mut rng = RngStream::for_sample(key, "acceptance6", "additive");
            let (out, draw) = rawboost_detailed(&carrier, &add_cfg, &mut rng).unwrap();
            let add = draw.additive.unwrap();
            assert!(!add.skipped, "noise should not be skipped on a live signal");
            let p_sig: f64 = carrier.samples().iter().map(|&v| (v as f64).powi(2)).sum();
            let p_noise: f64 = out
                .samples()
                .iter()
                .zip(carrier.samples())
                .map(|(&o, &i)| ((o - i) as f64).powi(2))
                .sum();
            let measured = 10.0 * (p_sig / p_noise).log10();
            assert!(
                (measured - add.snr_db).abs() <= 0.5,
                "drew {} dB SNR, measured {measured} dB",
                add.snr_db
            );
        }

        // Convolutive mode notches all five drawn bands on white noise.
        let conv_cfg = RawBoostConfig {
            algo_set: [RawBoostAlgo::Convolutive].into_iter().collect(),
            ..RawBoostConfig::default()
        };
        assert_eq!(conv_cfg.n_bands, 5);
        let mut rng = RngStream::for_sample(9, "acceptance6", "convolutive");
        let (out, draw) = rawboost_detailed(&carrier, &conv_cfg, &mut rng).unwrap();
        let notches = draw.convolutive.unwrap();
        assert_eq!(notches.len(), 5, "expected exactly nBands = 5 notches");
        for notch in &notches {
            let lo = notch.center_hz - notch.width_hz / 4.0;
            let hi = notch.center_hz + notch.width_hz / 4.0;
            let dip = band_power_db(&carrier, lo, hi) - band_power_db(&out, lo, hi);
            assert!(
                dip > 3.0,
                "no dip at {:.0} Hz (attenuated {dip:.2} dB)",
                notch.center_hz
            );
        }
    });
}

// --------------------------------------------- 7: end-to-end separability

#[test]
fn criterion_07_end_to_end_separability() {
    criterion(7, "detector learns synthesis artifacts on a 200-utterance corpus", || {
        let dir = tempfile::tempdir().unwrap();
        let real_manifest = toy_corpus(dir.path(), 8, 25, 2.0);

        let mut cfg = ExperimentConfig::default();
        cfg.seed = 7;
        cfg.transforms.level = 1;
        cfg.synthesis.vc = VcSpec::KnnReference { k: 4 };
        cfg.synthesis.vocoders = vec![VocoderSpec::GriffinLim { n_mels: 80, iters: 32 }];
        cfg.synthesis.branch_ratio = 0.5;

        let out = tempfile::tempdir().unwrap();
        let synth = cmd_synthesize(&cfg, &real_manifest, out.path()).unwrap();
        assert_eq!(synth.n_real, 200);
        assert!(synth.n_fake >= 198, "too many synthesis failures");

        // Stratified 25% hold-out: every fourth record of each class.
        let merged = read_manifest(&synth.merged_manifest).unwrap();
        let mut train_records: Vec<SampleRecord> = Vec::new();
        let mut dev_records: Vec<SampleRecord> = Vec::new();
        for label in [Label::Real, Label::Fake] {
            for (i, r) in merged.iter().filter(|r| r.label == label).enumerate() {
                if i % 4 == 0 {
                    dev_records.push(r.clone());
                } else {
                    train_records.push(r.clone());
                }
            }
        }
        let split = tempfile::tempdir().unwrap();
        let train_path = split.path().join("train.tsv");
        let dev_path = split.path().join("dev.tsv");
        write_manifest(&train_path, &train_records).unwrap();
        write_manifest(&dev_path, &dev_records).unwrap();

        let detector = DetectorSpec {
            front: ToyFrontEndConfig {
                n_mels: 40,
                hidden: 24,
                d_front: 48,
                kernel: 3,
            },
            proj_dim: 24,
            dropout: 0.3,
            ..DetectorSpec::default()
        };
        // The default rates are tuned for corpus-scale runs with tens of
        // thousands of steps; this 10-epoch gate sees ~250 optimizer steps,
        // so the rates are scaled up to match that budget.
        let train_cfg = TrainConfig {
            lr_front: 1e-3,
            lr_head: 1e-2,
            lr_loss: 1e-3,
            max_epochs: 10,
            warmup_epochs: 2,
            batch_size: 12,
            patience: 10,
            seed: 7,
            ..TrainConfig::default()
        };
        let run = tempfile::tempdir().unwrap();
        let outcome = train(&detector, &train_path, &dev_path, &train_cfg, run.path()).unwrap();
        assert!(
            outcome.best.best_dev_eer <= 0.10,
            "held-out EER {} exceeds 10%",
            outcome.best.best_dev_eer
        );

        // Label-shuffled control: the same scores against permuted labels
        // must be near chance, confirming the signal is not an artifact of
        // the evaluation machinery. A single 100-item permutation has a
        // per-draw standard deviation of about 0.05, so the median over
        // several shuffles is the stable estimate of the control's level.
        let model = outcome.best.restore_model().unwrap();
        let (scores, failures) = score_manifest(&model, &dev_path).unwrap();
        assert!(failures.is_empty());
        let mut control_eers: Vec<f64> = (0..11u64)
            .map(|trial| {
                let mut labels: Vec<Label> =
                    scores.entries().iter().map(|e| e.label).collect();
                let mut rng =
                    RngStream::for_sample(trial, "acceptance7", "control");
                for i in (1..labels.len()).rev() {
                    let j = rng.random_range(0..=i);
                    labels.swap(i, j);
                }
                let shuffled = ScoreSet::new(
                    scores
                        .entries()
                        .iter()
                        .zip(&labels)
                        .map(|(e, &label)| ScoreEntry {
                            utterance_id: e.utterance_id.clone(),
                            label,
                            score: e.score,
                        })
                        .collect(),
                )
                .unwrap();
                eer(&shuffled).unwrap().0
            })
            .collect();
        control_eers.sort_by(f64::total_cmp);
        let control_eer = control_eers[control_eers.len() / 2];
        assert!(
            (0.4..=0.6).contains(&control_eer),
            "median label-shuffled control EER {control_eer} is not near chance"
        );
        assert!(
            outcome.best.best_dev_eer < control_eer,
            "detector ({}) is not strictly better than the shuffled control ({control_eer})",
            outcome.best.best_dev_eer
        );
    });
}

// -------------------------------------------- 8: schedule and early stopping

#[test]
fn criterion_08_schedule_and_early_stop() {
    criterion(8, "lr schedule endpoints exact; early stop after `patience` epochs", || {
        for peak in [5e-6, 1e-4, 1e-6] {
            assert_eq!(lr_at(50, 300, 50, peak, 1e-6), peak, "apex not exact");
            assert_eq!(lr_at(300, 300, 50, peak, 1e-6), 1e-6, "final not exact");
        }

        // Zero learning rates freeze the model, so dev EER is constant and
        // the stopper must fire after exactly `patience` non-improvements.
        let dir = tempfile::tempdir().unwrap();
        let real_manifest = toy_corpus(dir.path(), 3, 2, 0.6);
        let out = tempfile::tempdir().unwrap();
        let gen_cfg = GenerateConfig {
            mode: SynthesisMode::Afss,
            branch_ratio: 0.5,
            preset: IntensityPreset::level(1).unwrap(),
            seed: 3,
        };
        let corpus = generate_corpus(&real_manifest, out.path(), &gen_cfg, &cheap_backends()).unwrap();
        let mut merged = read_manifest(&real_manifest).unwrap();
        let base = real_manifest.parent().unwrap();
        for r in &mut merged {
            r.path = base.join(&r.path);
        }
        for mut f in corpus.fakes {
            f.path = out.path().join(&f.path);
            merged.push(f);
        }
        let manifest = out.path().join("merged.tsv");
        write_manifest(&manifest, &merged).unwrap();

        let cfg = TrainConfig {
            lr_front: 0.0,
            lr_head: 0.0,
            lr_loss: 0.0,
            final_lr: 0.0,
            weight_decay: 0.0,
            max_epochs: 20,
            warmup_epochs: 1,
            batch_size: 4,
            patience: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let run = tempfile::tempdir().unwrap();
        let outcome = train(&DetectorSpec::micro(), &manifest, &manifest, &cfg, run.path()).unwrap();
        assert!(outcome.stopped_early);
        assert_eq!(
            outcome.history.len(),
            cfg.patience + 1,
            "expected baseline epoch + exactly `patience` non-improving epochs"
        );
        let eers: Vec<f64> = outcome.history.iter().map(|s| s.dev_eer).collect();
        assert!(
            eers.windows(2).all(|w| w[0] == w[1]),
            "rigged dev EER was not constant: {eers:?}"
        );
    });
}

// ------------------------------------------------------------ 9: determinism

#[test]
fn criterion_09_determinism() {
    criterion(9, "same seed reproduces manifests and history byte-for-byte", || {
        let dir = tempfile::tempdir().unwrap();
        let real_manifest = toy_corpus(dir.path(), 3, 2, 0.6);

        let mut cfg = ExperimentConfig::default();
        cfg.seed = 21;
        cfg.synthesis.vc = VcSpec::Identity;
        cfg.synthesis.vocoders = vec![VocoderSpec::GriffinLim { n_mels: 40, iters: 4 }];
        cfg.detector = DetectorSpec::micro();
        cfg.training.max_epochs = 3;
        cfg.training.warmup_epochs = 1;
        cfg.training.batch_size = 4;

        let out_a = tempfile::tempdir().unwrap();
        let out_b = tempfile::tempdir().unwrap();
        let a = cmd_synthesize(&cfg, &real_manifest, out_a.path()).unwrap();
        let b = cmd_synthesize(&cfg, &real_manifest, out_b.path()).unwrap();
        assert_eq!(
            std::fs::read(&a.fake_manifest).unwrap(),
            std::fs::read(&b.fake_manifest).unwrap(),
            "fake manifests differ between same-seed reruns"
        );

        let resolved = cfg.resolved();
        let run_a = tempfile::tempdir().unwrap();
        let run_b = tempfile::tempdir().unwrap();
        let t_a = train(
            &resolved.detector,
            &a.merged_manifest,
            &a.merged_manifest,
            &resolved.training,
            run_a.path(),
        )
        .unwrap();
        let t_b = train(
            &resolved.detector,
            &a.merged_manifest,
            &a.merged_manifest,
            &resolved.training,
            run_b.path(),
        )
        .unwrap();
        assert_eq!(
            std::fs::read(&t_a.history_path).unwrap(),
            std::fs::read(&t_b.history_path).unwrap(),
            "history logs differ between same-seed reruns"
        );
        assert_eq!(t_a.best, t_b.best);
    });
}

// ----------------------------------------------- 10: cross-speaker ablation

#[test]
fn criterion_10_cross_vc_plumbing() {
    criterion(10, "cross_vc pairs different speakers with zero self provenance", || {
        let dir = tempfile::tempdir().unwrap();
        let real_manifest = toy_corpus(dir.path(), 4, 3, 0.6);
        let reals = read_manifest(&real_manifest).unwrap();
        let speaker_of: BTreeMap<&str, &str> = reals
            .iter()
            .map(|r| (r.utterance_id.as_str(), r.speaker_id.as_str()))
            .collect();

        let out = tempfile::tempdir().unwrap();
        let cfg = GenerateConfig {
            mode: SynthesisMode::CrossVc,
            branch_ratio: 0.5,
            preset: IntensityPreset::level(1).unwrap(),
            seed: 13,
        };
        let corpus = generate_corpus(&real_manifest, out.path(), &cfg, &cheap_backends()).unwrap();
        assert_eq!(corpus.fakes.len(), 12);

        for fake in &corpus.fakes {
            assert_eq!(fake.provenance, Provenance::CrossVc);
            let source = fake.utterance_id.rsplit_once('_').unwrap().0;
            // Labeled with the source speaker, converted toward a different one.
            assert_eq!(fake.speaker_id, speaker_of[source]);
            let target = fake
                .transform_log
                .target_speaker
                .as_deref()
                .expect("cross_vc must record its target speaker");
            assert_ne!(
                target, fake.speaker_id,
                "{} was converted toward its own speaker",
                fake.utterance_id
            );
        }
    });
}
