//! The binary detector: a pluggable front end, a linear projection to 128
//! dimensions, and the classification head (ReLU, dropout 0.5, mean pooling
//! over frames, dense to one logit).

pub mod nn;
mod toy;

pub use nn::{ParamView, ParamViewMut};
pub use toy::{ToyFrontEnd, ToyFrontEndConfig, FEATURE_EPS};

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::audio::{Waveform, PIPELINE_RATE};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use nn::{dropout_mask, relu, relu_backward, sigmoid, Linear};
use toy::ToyFrontCache;

/// Front-end feature extractor: waveform in, frame sequence out.
///
/// Outputs are [n_frames × d_front], finite, with at least one frame for any
/// input of 25 ms or more. External pretrained extractors plug in here;
/// [`ToyFrontEnd`] is the in-process trainable instance.
pub trait FrontEnd: Send + Sync {
    fn extract(&self, w: &Waveform) -> Result<Array2<f64>>;
    fn d_front(&self) -> usize;
    fn trainable(&self) -> bool;
}

/// Concrete front end carried by a model. The toy variant trains in-process;
/// an external extractor is inference-only and its parameters live elsewhere.
pub enum FrontEndImpl {
    Toy(ToyFrontEnd),
    External(Box<dyn FrontEnd>),
}

impl FrontEndImpl {
    pub fn d_front(&self) -> usize {
        match self {
            FrontEndImpl::Toy(t) => t.d_front(),
            FrontEndImpl::External(e) => e.d_front(),
        }
    }

    pub fn trainable(&self) -> bool {
        match self {
            FrontEndImpl::Toy(t) => t.trainable(),
            FrontEndImpl::External(e) => e.trainable(),
        }
    }

    fn extract(&self, w: &Waveform) -> Result<Array2<f64>> {
        match self {
            FrontEndImpl::Toy(t) => t.extract(w),
            FrontEndImpl::External(e) => e.extract(w),
        }
    }
}

/// Minimum input length accepted by [`DetectorModel::forward`].
pub const MIN_INPUT_SECS: f64 = 0.1;

/// Dimensionalities pinned by the architecture: 1024-wide features projected
/// to 128 before the head.
pub const REFERENCE_D_FRONT: usize = 1024;
pub const REFERENCE_PROJ_DIM: usize = 128;

/// Available in-process front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontEndChoice {
    Toy,
}

/// Serializable architecture description; enough to rebuild a model for
/// checkpoint loading.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub front_end: FrontEndChoice,
    pub front: ToyFrontEndConfig,
    pub proj_dim: usize,
    pub dropout: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            front_end: FrontEndChoice::Toy,
            front: ToyFrontEndConfig::default(),
            proj_dim: REFERENCE_PROJ_DIM,
            dropout: 0.5,
        }
    }
}

impl DetectorSpec {
    /// Tiny spec for gradient checks and fast tests.
    pub fn micro() -> Self {
        DetectorSpec {
            front_end: FrontEndChoice::Toy,
            front: ToyFrontEndConfig::micro(),
            proj_dim: 4,
            dropout: 0.5,
        }
    }

    pub fn build(&self, seed: u64) -> Result<DetectorModel> {
        match self.front_end {
            FrontEndChoice::Toy => {
                let front = ToyFrontEnd::new(self.front.clone(), seed);
                DetectorModel::new(FrontEndImpl::Toy(front), self.proj_dim, self.dropout, seed)
            }
        }
    }
}

/// Front end → projection → ReLU → Dropout(0.5) → mean pool → dense → logit.
pub struct DetectorModel {
    front: FrontEndImpl,
    projection: Linear,
    dense: Linear,
    dropout_p: f64,
    front_frozen: bool,
}

/// Intermediates from a training-mode forward pass, consumed by `backward`.
pub struct ForwardCache {
    front_cache: Option<ToyFrontCache>,
    front_out: Array2<f64>,
    proj_out: Array2<f64>,
    relu_mask: Array2<f64>,
    drop_mask: Array2<f64>,
    dropped: Array2<f64>,
    pooled: Array1<f64>,
}

/// Names of every trainable parameter, split the way the optimizer needs:
/// front end, head (projection + dense), and loss. The loss group is filled
/// in by the training module; the model itself owns no loss parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterGroups {
    pub front: Vec<String>,
    pub head: Vec<String>,
    pub loss: Vec<String>,
}

impl ParameterGroups {
    pub fn all(&self) -> Vec<String> {
        let mut v = self.front.clone();
        v.extend(self.head.iter().cloned());
        v.extend(self.loss.iter().cloned());
        v
    }
}

impl DetectorModel {
    pub fn new(front: FrontEndImpl, proj_dim: usize, dropout_p: f64, seed: u64) -> Result<Self> {
        if proj_dim == 0 {
            return Err(Error::Config("projection width must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::Config(format!(
                "dropout probability must lie in [0, 1), got {dropout_p}"
            )));
        }
        let d_front = front.d_front();
        let mut proj_rng = RngStream::for_sample(seed, "projection", "init");
        Ok(DetectorModel {
            front,
            projection: Linear::new(d_front, proj_dim, &mut proj_rng),
            dense: Linear::zeros(proj_dim, 1),
            dropout_p,
            front_frozen: false,
        })
    }

    /// The reference architecture: toy front end at 1024 wide, projection
    /// 1024 → 128, dropout 0.5.
    pub fn reference(seed: u64) -> Self {
        let front = ToyFrontEnd::new(ToyFrontEndConfig::default(), seed);
        DetectorModel::new(FrontEndImpl::Toy(front), REFERENCE_PROJ_DIM, 0.5, seed)
            .expect("reference dimensions are valid")
    }

    /// Tiny model for gradient checks: d_front = 8, projection 8 → 4.
    pub fn micro(seed: u64) -> Self {
        let front = ToyFrontEnd::new(ToyFrontEndConfig::micro(), seed);
        DetectorModel::new(FrontEndImpl::Toy(front), 4, 0.5, seed)
            .expect("micro dimensions are valid")
    }

    pub fn d_front(&self) -> usize {
        self.front.d_front()
    }

    pub fn proj_dim(&self) -> usize {
        self.projection.n_out()
    }

    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    pub fn front(&self) -> &FrontEndImpl {
        &self.front
    }

    pub fn front_frozen(&self) -> bool {
        self.front_frozen
    }

    pub fn set_front_frozen(&mut self, frozen: bool) {
        self.front_frozen = frozen;
    }

    fn check_input(&self, w: &Waveform) -> Result<()> {
        if w.sample_rate() != PIPELINE_RATE {
            return Err(Error::InvalidInput(format!(
                "detector input must be at {PIPELINE_RATE} Hz, got {}",
                w.sample_rate()
            )));
        }
        if w.duration_secs() < MIN_INPUT_SECS {
            return Err(Error::InvalidInput(format!(
                "detector input too short: {:.4} s < {MIN_INPUT_SECS} s",
                w.duration_secs()
            )));
        }
        Ok(())
    }

    /// Deterministic inference: dropout disabled.
    pub fn forward_eval(&self, w: &Waveform) -> Result<(f64, f64)> {
        self.check_input(w)?;
        let front_out = self.front.extract(w)?;
        Ok(self.head_eval(&front_out))
    }

    /// Full forward pass. In train mode dropout draws its mask from `rng`;
    /// in eval mode `rng` is unused and the pass is a pure function.
    pub fn forward(
        &self,
        w: &Waveform,
        train_mode: bool,
        rng: &mut impl Rng,
    ) -> Result<(f64, f64)> {
        if !train_mode {
            return self.forward_eval(w);
        }
        self.check_input(w)?;
        match &self.front {
            FrontEndImpl::Toy(t) => {
                let feats = t.features(w)?;
                let (logit, p, _) = self.forward_features_train(&feats, rng)?;
                Ok((logit, p))
            }
            FrontEndImpl::External(e) => {
                let front_out = e.extract(w)?;
                let (logit, p, _) = self.head_train(None, front_out, rng);
                Ok((logit, p))
            }
        }
    }

    /// Eval-mode pass over precomputed log-mel features (toy front end
    /// only); used by the training loop's cached dev evaluation.
    pub fn eval_from_features(&self, feats: &Array2<f64>) -> Result<(f64, f64)> {
        let toy = match &self.front {
            FrontEndImpl::Toy(t) => t,
            FrontEndImpl::External(_) => {
                return Err(Error::Config(
                    "eval_from_features needs the in-process toy front end".into(),
                ))
            }
        };
        let (front_out, _) = toy.forward_features(feats);
        Ok(self.head_eval(&front_out))
    }

    /// Head on an already-extracted feature sequence, eval mode.
    pub fn head_eval(&self, front_out: &Array2<f64>) -> (f64, f64) {
        let proj_out = self.projection.forward(front_out.view());
        let (activated, _) = relu(&proj_out);
        let pooled = activated
            .mean_axis(ndarray::Axis(0))
            .expect("front end guarantees at least one frame");
        let logit = self.dense.forward(pooled.view().insert_axis(ndarray::Axis(0)))[[0, 0]];
        (logit, sigmoid(logit))
    }

    /// Training-mode pass over precomputed log-mel features (toy front end
    /// only), returning the cache for `backward`.
    pub fn forward_features_train(
        &self,
        feats: &Array2<f64>,
        rng: &mut impl Rng,
    ) -> Result<(f64, f64, ForwardCache)> {
        let toy = match &self.front {
            FrontEndImpl::Toy(t) => t,
            FrontEndImpl::External(_) => {
                return Err(Error::Config(
                    "forward_features_train needs the in-process toy front end".into(),
                ))
            }
        };
        let (front_out, cache) = toy.forward_features(feats);
        Ok(self.head_train(Some(cache), front_out, rng))
    }

    fn head_train(
        &self,
        front_cache: Option<ToyFrontCache>,
        front_out: Array2<f64>,
        rng: &mut impl Rng,
    ) -> (f64, f64, ForwardCache) {
        let proj_out = self.projection.forward(front_out.view());
        let (activated, relu_mask) = relu(&proj_out);
        let drop_mask = dropout_mask(activated.nrows(), activated.ncols(), self.dropout_p, rng);
        let dropped = &activated * &drop_mask;
        let pooled = dropped
            .mean_axis(ndarray::Axis(0))
            .expect("front end guarantees at least one frame");
        let logit = self.dense.forward(pooled.view().insert_axis(ndarray::Axis(0)))[[0, 0]];
        let p = sigmoid(logit);
        (
            logit,
            p,
            ForwardCache {
                front_cache,
                front_out,
                proj_out,
                relu_mask,
                drop_mask,
                dropped: dropped.clone(),
                pooled,
            },
        )
    }

    /// Backpropagate d(loss)/d(logit), accumulating gradients in every
    /// trainable layer (the front end too unless frozen or external).
    pub fn backward(&mut self, cache: &ForwardCache, d_logit: f64) {
        let _ = &cache.proj_out;
        let g_logit = Array2::from_elem((1, 1), d_logit);
        let g_pooled = self
            .dense
            .backward(cache.pooled.view().insert_axis(ndarray::Axis(0)), g_logit.view());

        let t = cache.dropped.nrows() as f64;
        let mut g_dropped = Array2::zeros(cache.dropped.dim());
        for mut row in g_dropped.rows_mut() {
            row.assign(&(&g_pooled.row(0) / t));
        }
        let g_activated = &g_dropped * &cache.drop_mask;
        let g_proj = relu_backward(&g_activated, &cache.relu_mask);
        let g_front = self.projection.backward(cache.front_out.view(), g_proj.view());

        if self.front_frozen {
            return;
        }
        if let (FrontEndImpl::Toy(toy), Some(fc)) = (&mut self.front, &cache.front_cache) {
            toy.backward(fc, &g_front);
        }
    }

    pub fn zero_grad(&mut self) {
        if let FrontEndImpl::Toy(t) = &mut self.front {
            t.zero_grad();
        }
        self.projection.zero_grad();
        self.dense.zero_grad();
    }

    /// Three disjoint groups covering every in-process trainable parameter;
    /// the loss group is empty here and filled by the training module.
    pub fn parameter_groups(&self) -> ParameterGroups {
        let front = match &self.front {
            FrontEndImpl::Toy(_) => vec![
                "front.conv1.w".to_string(),
                "front.conv1.b".to_string(),
                "front.conv2.w".to_string(),
                "front.conv2.b".to_string(),
            ],
            FrontEndImpl::External(_) => vec![],
        };
        ParameterGroups {
            front,
            head: vec![
                "projection.w".to_string(),
                "projection.b".to_string(),
                "dense.w".to_string(),
                "dense.b".to_string(),
            ],
            loss: vec![],
        }
    }

    /// Immutable named views of every parameter tensor.
    pub fn params(&self) -> Vec<ParamView<'_>> {
        let mut out = Vec::new();
        if let FrontEndImpl::Toy(t) = &self.front {
            out.push(ParamView {
                name: "front.conv1.w".into(),
                data: t.conv1.w.as_slice().unwrap(),
                grad: t.conv1.gw.as_slice().unwrap(),
                shape: t.conv1.w_shape(),
            });
            out.push(ParamView {
                name: "front.conv1.b".into(),
                data: t.conv1.b.as_slice().unwrap(),
                grad: t.conv1.gb.as_slice().unwrap(),
                shape: vec![t.conv1.c_out()],
            });
            out.push(ParamView {
                name: "front.conv2.w".into(),
                data: t.conv2.w.as_slice().unwrap(),
                grad: t.conv2.gw.as_slice().unwrap(),
                shape: t.conv2.w_shape(),
            });
            out.push(ParamView {
                name: "front.conv2.b".into(),
                data: t.conv2.b.as_slice().unwrap(),
                grad: t.conv2.gb.as_slice().unwrap(),
                shape: vec![t.conv2.c_out()],
            });
        }
        out.push(ParamView {
            name: "projection.w".into(),
            data: self.projection.w.as_slice().unwrap(),
            grad: self.projection.gw.as_slice().unwrap(),
            shape: vec![self.projection.n_out(), self.projection.n_in()],
        });
        out.push(ParamView {
            name: "projection.b".into(),
            data: self.projection.b.as_slice().unwrap(),
            grad: self.projection.gb.as_slice().unwrap(),
            shape: vec![self.projection.n_out()],
        });
        out.push(ParamView {
            name: "dense.w".into(),
            data: self.dense.w.as_slice().unwrap(),
            grad: self.dense.gw.as_slice().unwrap(),
            shape: vec![self.dense.n_out(), self.dense.n_in()],
        });
        out.push(ParamView {
            name: "dense.b".into(),
            data: self.dense.b.as_slice().unwrap(),
            grad: self.dense.gb.as_slice().unwrap(),
            shape: vec![self.dense.n_out()],
        });
        out
    }

    /// Mutable named views, in the same order as [`DetectorModel::params`].
    pub fn params_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let mut out = Vec::new();
        if let FrontEndImpl::Toy(t) = &mut self.front {
            let c1_shape = t.conv1.w_shape();
            let c1_out = t.conv1.c_out();
            let c2_shape = t.conv2.w_shape();
            let c2_out = t.conv2.c_out();
            out.push(ParamViewMut {
                name: "front.conv1.w".into(),
                data: t.conv1.w.as_slice_mut().unwrap(),
                grad: t.conv1.gw.as_slice_mut().unwrap(),
                shape: c1_shape,
            });
            out.push(ParamViewMut {
                name: "front.conv1.b".into(),
                data: t.conv1.b.as_slice_mut().unwrap(),
                grad: t.conv1.gb.as_slice_mut().unwrap(),
                shape: vec![c1_out],
            });
            out.push(ParamViewMut {
                name: "front.conv2.w".into(),
                data: t.conv2.w.as_slice_mut().unwrap(),
                grad: t.conv2.gw.as_slice_mut().unwrap(),
                shape: c2_shape,
            });
            out.push(ParamViewMut {
                name: "front.conv2.b".into(),
                data: t.conv2.b.as_slice_mut().unwrap(),
                grad: t.conv2.gb.as_slice_mut().unwrap(),
                shape: vec![c2_out],
            });
        }
        let proj_dims = (self.projection.n_out(), self.projection.n_in());
        out.push(ParamViewMut {
            name: "projection.w".into(),
            data: self.projection.w.as_slice_mut().unwrap(),
            grad: self.projection.gw.as_slice_mut().unwrap(),
            shape: vec![proj_dims.0, proj_dims.1],
        });
        out.push(ParamViewMut {
            name: "projection.b".into(),
            data: self.projection.b.as_slice_mut().unwrap(),
            grad: self.projection.gb.as_slice_mut().unwrap(),
            shape: vec![proj_dims.0],
        });
        let dense_dims = (self.dense.n_out(), self.dense.n_in());
        out.push(ParamViewMut {
            name: "dense.w".into(),
            data: self.dense.w.as_slice_mut().unwrap(),
            grad: self.dense.gw.as_slice_mut().unwrap(),
            shape: vec![dense_dims.0, dense_dims.1],
        });
        out.push(ParamViewMut {
            name: "dense.b".into(),
            data: self.dense.b.as_slice_mut().unwrap(),
            grad: self.dense.gb.as_slice_mut().unwrap(),
            shape: vec![dense_dims.0],
        });
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }
}
