//! Learnable reweighting loss: binary cross entropy whose per-class weights
//! are trainable through sigmoid maps. The fake weight lives in (1, 2) and
//! the real weight in (0, 1), so fakes always receive higher emphasis no
//! matter what the optimizer does to the raw parameters.

use serde::{Deserialize, Serialize};

use crate::detector::nn::sigmoid;

/// Probabilities are clamped to [ε, 1−ε] before the logarithms.
pub const LOSS_EPS: f64 = 1e-7;

/// Sigmoid outputs are kept this far inside (0, 1). Beyond |w̃| ≈ 27.6 the
/// f64 sigmoid saturates to exactly 0 or 1, which would let the weights
/// touch their open-interval endpoints; the margin keeps the bounds strict.
/// σ'(w̃) is below the margin wherever the clamp binds, so the analytic
/// gradients stay consistent to well under any useful tolerance.
const WEIGHT_MARGIN: f64 = 1e-12;

fn bounded_sigmoid(x: f64) -> f64 {
    sigmoid(x).clamp(WEIGHT_MARGIN, 1.0 - WEIGHT_MARGIN)
}

/// The two unconstrained trainable scalars behind the class weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReweightingLossState {
    pub w_tilde_fake: f64,
    pub w_tilde_real: f64,
    #[serde(skip)]
    pub grad_w_tilde_fake: f64,
    #[serde(skip)]
    pub grad_w_tilde_real: f64,
}

impl Default for ReweightingLossState {
    fn default() -> Self {
        ReweightingLossState {
            w_tilde_fake: 0.0,
            w_tilde_real: 0.0,
            grad_w_tilde_fake: 0.0,
            grad_w_tilde_real: 0.0,
        }
    }
}

impl ReweightingLossState {
    /// Effective fake-class weight, 1 + σ(w̃_fake) ∈ (1, 2).
    pub fn w_fake(&self) -> f64 {
        1.0 + bounded_sigmoid(self.w_tilde_fake)
    }

    /// Effective real-class weight, σ(w̃_real) ∈ (0, 1).
    pub fn w_real(&self) -> f64 {
        bounded_sigmoid(self.w_tilde_real)
    }

    pub fn zero_grad(&mut self) {
        self.grad_w_tilde_fake = 0.0;
        self.grad_w_tilde_real = 0.0;
    }
}

/// Loss value and its partial derivatives for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub loss: f64,
    /// ∂loss/∂p at the (clamped) probability.
    pub d_p: f64,
    /// ∂loss/∂w̃_fake.
    pub d_w_tilde_fake: f64,
    /// ∂loss/∂w̃_real.
    pub d_w_tilde_real: f64,
}

/// Reweighted binary cross entropy for one sample.
///
/// loss = −[w_fake · y · log p + w_real · (1−y) · log(1−p)], with y ∈ {0, 1}
/// and p the predicted fake probability, clamped to [ε, 1−ε] first.
pub fn reweighted_bce(y: u8, p: f64, state: &ReweightingLossState) -> LossTerms {
    debug_assert!(y <= 1, "label must be 0 or 1");
    let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    let w_fake = state.w_fake();
    let w_real = state.w_real();
    let sig_f = sigmoid(state.w_tilde_fake);
    let sig_r = sigmoid(state.w_tilde_real);

    if y == 1 {
        LossTerms {
            loss: -w_fake * p.ln(),
            d_p: -w_fake / p,
            // ∂w_fake/∂w̃_fake = σ'(w̃_fake) = σ(1−σ).
            d_w_tilde_fake: -p.ln() * sig_f * (1.0 - sig_f),
            d_w_tilde_real: 0.0,
        }
    } else {
        LossTerms {
            loss: -w_real * (1.0 - p).ln(),
            d_p: w_real / (1.0 - p),
            d_w_tilde_fake: 0.0,
            d_w_tilde_real: -(1.0 - p).ln() * sig_r * (1.0 - sig_r),
        }
    }
}

/// Chain the loss gradient back through p = σ(logit).
pub fn d_loss_d_logit(terms: &LossTerms, p: f64) -> f64 {
    terms.d_p * p * (1.0 - p)
}
