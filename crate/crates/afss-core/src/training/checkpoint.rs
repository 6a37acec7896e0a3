//! Versioned checkpoint container: every parameter tensor, the two loss raw
//! parameters, optimizer state, training progress, and the config snapshot.
//! Writes are atomic (temp file + rename).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::ReweightingLossState;
use super::optimizer::AdamW;
use super::TrainConfig;
use crate::detector::{DetectorModel, DetectorSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorData {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Completed epochs (1-based count).
    pub epoch: usize,
    pub global_step: usize,
    pub best_dev_eer: f64,
    pub epochs_since_improve: usize,
    pub config: TrainConfig,
    pub detector: DetectorSpec,
    pub params: BTreeMap<String, TensorData>,
    pub loss: ReweightingLossState,
    pub optimizer: AdamW,
}

impl Checkpoint {
    /// Snapshot the current model and loss parameters.
    pub fn capture(
        model: &DetectorModel,
        loss: &ReweightingLossState,
        optimizer: &AdamW,
        config: &TrainConfig,
        detector: &DetectorSpec,
        epoch: usize,
        global_step: usize,
        best_dev_eer: f64,
        epochs_since_improve: usize,
    ) -> Self {
        let params = model
            .params()
            .into_iter()
            .map(|p| {
                (
                    p.name,
                    TensorData {
                        shape: p.shape,
                        data: p.data.to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            epoch,
            global_step,
            best_dev_eer,
            epochs_since_improve,
            config: config.clone(),
            detector: detector.clone(),
            params,
            loss: *loss,
            optimizer: optimizer.clone(),
        }
    }

    /// Rebuild the model this checkpoint describes and load its weights.
    pub fn restore_model(&self) -> Result<DetectorModel> {
        let mut model = self.detector.build(self.config.seed)?;
        for view in model.params_mut() {
            let stored = self.params.get(&view.name).ok_or_else(|| {
                Error::Checkpoint(format!("parameter '{}' missing from checkpoint", view.name))
            })?;
            if stored.shape != view.shape {
                return Err(Error::Checkpoint(format!(
                    "parameter '{}' has shape {:?}, checkpoint holds {:?}",
                    view.name, view.shape, stored.shape
                )));
            }
            view.data.copy_from_slice(&stored.data);
        }
        Ok(model)
    }
}

/// Atomic write: serialize to `<path>.tmp`, then rename over `path`.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let json = serde_json::to_string(ckpt)
        .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: version {} unsupported (expected {CHECKPOINT_VERSION})",
            path.display(),
            ckpt.version
        )));
    }
    Ok(ckpt)
}
