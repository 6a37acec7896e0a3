//! Trainable desk-scale front end: log-mel frames through two 1-D
//! convolution layers with ReLU, widened to the 1024-dimensional feature
//! contract of the projection layer.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::nn::{relu, relu_backward, Conv1d};
use super::FrontEnd;
use crate::audio::{mel_encode, StftParams, Waveform};
use crate::error::Result;
use crate::rng::RngStream;

/// Floor added before the log so silence maps to a finite feature value.
pub const FEATURE_EPS: f64 = 1e-5;

/// Dimensions of a [`ToyFrontEnd`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyFrontEndConfig {
    pub n_mels: usize,
    pub hidden: usize,
    pub d_front: usize,
    pub kernel: usize,
}

impl Default for ToyFrontEndConfig {
    fn default() -> Self {
        ToyFrontEndConfig {
            n_mels: 80,
            hidden: 128,
            d_front: 1024,
            kernel: 3,
        }
    }
}

impl ToyFrontEndConfig {
    /// Tiny dimensions for gradient checks.
    pub fn micro() -> Self {
        ToyFrontEndConfig {
            n_mels: 8,
            hidden: 6,
            d_front: 8,
            kernel: 3,
        }
    }
}

/// Log-mel → Conv1d → ReLU → Conv1d → ReLU, frames × d_front out.
#[derive(Debug, Clone)]
pub struct ToyFrontEnd {
    cfg: ToyFrontEndConfig,
    stft: StftParams,
    pub(crate) conv1: Conv1d,
    pub(crate) conv2: Conv1d,
}

/// Intermediates kept for the backward pass.
pub struct ToyFrontCache {
    col1: Array2<f64>,
    mask1: Array2<f64>,
    post1: Array2<f64>,
    col2: Array2<f64>,
    mask2: Array2<f64>,
}

impl ToyFrontEnd {
    pub fn new(cfg: ToyFrontEndConfig, seed: u64) -> Self {
        let mut r1 = RngStream::for_sample(seed, "toy_front.conv1", "init");
        let mut r2 = RngStream::for_sample(seed, "toy_front.conv2", "init");
        let conv1 = Conv1d::new(cfg.n_mels, cfg.hidden, cfg.kernel, &mut r1);
        let conv2 = Conv1d::new(cfg.hidden, cfg.d_front, cfg.kernel, &mut r2);
        ToyFrontEnd {
            cfg,
            stft: StftParams::default(),
            conv1,
            conv2,
        }
    }

    pub fn config(&self) -> &ToyFrontEndConfig {
        &self.cfg
    }

    /// Fixed (non-trainable) log-mel analysis stage.
    pub fn features(&self, w: &Waveform) -> Result<Array2<f64>> {
        let mel = mel_encode(w, self.stft, self.cfg.n_mels)?;
        Ok(mel.log_data(FEATURE_EPS))
    }

    /// Trainable stage over precomputed features: [t, n_mels] → [t, d_front].
    pub fn forward_features(&self, feats: &Array2<f64>) -> (Array2<f64>, ToyFrontCache) {
        let (y1, col1) = self.conv1.forward(feats.view());
        let (post1, mask1) = relu(&y1);
        let (y2, col2) = self.conv2.forward(post1.view());
        let (out, mask2) = relu(&y2);
        (
            out,
            ToyFrontCache {
                col1,
                mask1,
                post1,
                col2,
                mask2,
            },
        )
    }

    /// Accumulates gradients for both convolutions.
    pub fn backward(&mut self, cache: &ToyFrontCache, g_out: &Array2<f64>) {
        let g2 = relu_backward(g_out, &cache.mask2);
        let g_post1 = self.conv2.backward(&cache.col2, g2.view());
        debug_assert_eq!(g_post1.dim(), cache.post1.dim());
        let g1 = relu_backward(&g_post1, &cache.mask1);
        self.conv1.backward(&cache.col1, g1.view());
    }

    pub fn zero_grad(&mut self) {
        self.conv1.zero_grad();
        self.conv2.zero_grad();
    }
}

impl FrontEnd for ToyFrontEnd {
    fn extract(&self, w: &Waveform) -> Result<Array2<f64>> {
        let feats = self.features(w)?;
        Ok(self.forward_features(&feats).0)
    }

    fn d_front(&self) -> usize {
        self.cfg.d_front
    }

    fn trainable(&self) -> bool {
        true
    }
}
