//! Experiment configuration: one TOML file drives synthesis, detector,
//! training, and paths, under a single root seed. Unknown keys are rejected
//! and the resolved config is echoed verbatim into the run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorSpec;
use crate::error::{Error, Result};
use crate::synthesis::{
    Backends, GenerateConfig, GriffinLimVocoder, IdentityVc, IdentityVocoder, ReferenceKnnVc,
    SubprocessVc, SubprocessVocoder, SynthesisMode,
};
use crate::training::TrainConfig;
use crate::transforms::IntensityPreset;

/// Name of the environment variable holding a default config path.
pub const CONFIG_ENV_VAR: &str = "AFSS_CONFIG";

/// Everything one experiment needs, deserialized from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root seed; every stage derives its own stream from it.
    pub seed: u64,
    pub transforms: TransformsSection,
    pub synthesis: SynthesisSection,
    pub detector: DetectorSpec,
    pub training: TrainConfig,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformsSection {
    /// Built-in intensity level, 0..=3.
    pub level: u8,
    /// Full preset override; wins over `level` when present.
    pub preset: Option<IntensityPreset>,
}

impl Default for TransformsSection {
    fn default() -> Self {
        TransformsSection {
            level: 1,
            preset: None,
        }
    }
}

impl TransformsSection {
    pub fn active_preset(&self) -> Result<IntensityPreset> {
        match &self.preset {
            Some(p) => {
                p.validate()?;
                Ok(p.clone())
            }
            None => IntensityPreset::level(self.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub mode: SynthesisMode,
    pub branch_ratio: f64,
    pub vc: VcSpec,
    pub vocoders: Vec<VocoderSpec>,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        SynthesisSection {
            mode: SynthesisMode::Afss,
            branch_ratio: 0.5,
            vc: VcSpec::KnnReference { k: 4 },
            vocoders: vec![VocoderSpec::GriffinLim { n_mels: 80, iters: 32 }],
        }
    }
}

impl SynthesisSection {
    pub fn backends(&self) -> Backends {
        Backends {
            vc: self.vc.build(),
            vocoders: self.vocoders.iter().map(|v| v.build()).collect(),
        }
    }
}

/// Voice-conversion backend registry entry. Externally tagged: unit
/// variants are plain strings (`vc = "identity"`), parameterized ones are
/// single-key tables (`[synthesis.vc.knn_reference] k = 4`); the external
/// tag is what lets serde reject unknown keys inside each variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VcSpec {
    Identity,
    KnnReference {
        k: usize,
    },
    Subprocess {
        name: String,
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

impl VcSpec {
    pub fn build(&self) -> Box<dyn crate::synthesis::VCBackend> {
        match self {
            VcSpec::Identity => Box::new(IdentityVc),
            VcSpec::KnnReference { k } => Box::new(ReferenceKnnVc { k: *k }),
            VcSpec::Subprocess {
                name,
                program,
                args,
            } => Box::new(SubprocessVc {
                backend_name: name.clone(),
                program: program.clone(),
                extra_args: args.clone(),
            }),
        }
    }
}

/// Vocoder backend registry entry; same shape rules as [`VcSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VocoderSpec {
    Identity,
    GriffinLim {
        n_mels: usize,
        iters: usize,
    },
    Subprocess {
        name: String,
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

impl VocoderSpec {
    pub fn build(&self) -> Box<dyn crate::synthesis::VocoderBackend> {
        match self {
            VocoderSpec::Identity => Box::new(IdentityVocoder),
            VocoderSpec::GriffinLim { n_mels, iters } => Box::new(GriffinLimVocoder {
                n_mels: *n_mels,
                iters: *iters,
                ..GriffinLimVocoder::default()
            }),
            VocoderSpec::Subprocess {
                name,
                program,
                args,
            } => Box::new(SubprocessVocoder {
                backend_name: name.clone(),
                program: program.clone(),
                extra_args: args.clone(),
            }),
        }
    }
}

/// Default input/output locations; command-line arguments override these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub run_dir: PathBuf,
    pub real_manifest: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub eval_manifests: Vec<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            run_dir: PathBuf::from("runs/exp"),
            real_manifest: None,
            train_manifest: None,
            dev_manifest: None,
            eval_manifests: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Normalize derived fields: the root seed overrides the nested
    /// training seed so one value controls the whole run.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.training.seed = c.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.transforms.active_preset()?;
        self.training.validate()?;
        self.generate_config()?.validate()?;
        Ok(())
    }

    /// The synthesis-stage settings implied by this config.
    pub fn generate_config(&self) -> Result<GenerateConfig> {
        Ok(GenerateConfig {
            mode: self.synthesis.mode,
            branch_ratio: self.synthesis.branch_ratio,
            preset: self.transforms.active_preset()?,
            seed: self.seed,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Default = root seed 7, level-1 transforms, AFSS mode with the
    /// reference kNN-VC and Griffin-Lim backends, reference detector,
    /// default training recipe.
    pub fn example_toml() -> String {
        ExperimentConfig::default().resolved().to_toml_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default().resolved();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn nondefault_config_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 1234;
        cfg.transforms.level = 3;
        cfg.synthesis.mode = SynthesisMode::CrossVc;
        cfg.synthesis.branch_ratio = 0.25;
        cfg.synthesis.vc = VcSpec::Subprocess {
            name: "ext_vc".into(),
            program: PathBuf::from("/usr/bin/true"),
            args: vec!["--fast".into()],
        };
        cfg.synthesis.vocoders = vec![
            VocoderSpec::Identity,
            VocoderSpec::GriffinLim { n_mels: 40, iters: 8 },
        ];
        cfg.detector.proj_dim = 64;
        cfg.training.batch_size = 8;
        cfg.paths.eval_manifests = vec![PathBuf::from("a.tsv"), PathBuf::from("b.tsv")];
        let cfg = cfg.resolved();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for text in [
            "unknown_top = 1",
            "[transforms]\nbogus = true",
            "[synthesis]\nextra = 2",
            "[synthesis.vc.knn_reference]\nk = 3\nbogus = 1",
            "[synthesis.vc.no_such_backend]\nk = 3",
            "[detector]\nwhatever = \"x\"",
            "[training]\nlr_typo = 0.1",
            "[paths]\nrundir = \"x\"",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(err.is_validation(), "{text} should be a config error: {err}");
        }
    }

    #[test]
    fn every_field_has_a_default() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.transforms.level, 1);
        assert_eq!(cfg.synthesis.branch_ratio, 0.5);
        assert_eq!(cfg.training.batch_size, 12);
    }

    #[test]
    fn root_seed_drives_training_seed_after_resolve() {
        let cfg = ExperimentConfig::from_toml_str("seed = 99").unwrap().resolved();
        assert_eq!(cfg.training.seed, 99);
        assert_eq!(cfg.generate_config().unwrap().seed, 99);
    }

    #[test]
    fn preset_override_beats_level() {
        let mut cfg = ExperimentConfig::default();
        cfg.transforms.level = 0;
        cfg.transforms.preset = Some(IntensityPreset::level(2).unwrap());
        assert_eq!(cfg.transforms.active_preset().unwrap().level, 2);
    }

    #[test]
    fn invalid_sections_fail_validation() {
        assert!(ExperimentConfig::from_toml_str("[transforms]\nlevel = 9").is_err());
        assert!(ExperimentConfig::from_toml_str("[training]\nbatch_size = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[synthesis]\nbranch_ratio = 1.5").is_err());
    }

    #[test]
    fn backends_build_with_declared_names() {
        let cfg = ExperimentConfig::default();
        let backends = cfg.synthesis.backends();
        assert_eq!(backends.vc.name(), "knn_vc_reference");
        assert_eq!(backends.vocoders.len(), 1);
        assert_eq!(backends.vocoders[0].name(), "griffin_lim");
    }
}
