//! Minimal dense/convolutional layers with explicit forward and backward
//! passes in f64. Gradients accumulate into the layer until `zero_grad`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// Borrowed view of one named parameter tensor and its gradient.
pub struct ParamView<'a> {
    pub name: String,
    pub data: &'a [f64],
    pub grad: &'a [f64],
    pub shape: Vec<usize>,
}

/// Mutable view used by optimizers and checkpoint loading.
pub struct ParamViewMut<'a> {
    pub name: String,
    pub data: &'a mut [f64],
    pub grad: &'a mut [f64],
    pub shape: Vec<usize>,
}

pub(crate) fn kaiming_uniform(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut impl Rng,
) -> Array2<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Affine map `y = x Wᵀ + b` over rows of `x`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub gw: Array2<f64>,
    pub gb: Array1<f64>,
}

impl Linear {
    pub fn new(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: kaiming_uniform(n_out, n_in, n_in, rng),
            b: Array1::zeros(n_out),
            gw: Array2::zeros((n_out, n_in)),
            gb: Array1::zeros(n_out),
        }
    }

    /// All-zero weights and biases; the zero-initialized classifier layer.
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Linear {
            w: Array2::zeros((n_out, n_in)),
            b: Array1::zeros(n_out),
            gw: Array2::zeros((n_out, n_in)),
            gb: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }

    /// `x`: [n, n_in] → [n, n_out].
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: ArrayView2<f64>, g_out: ArrayView2<f64>) -> Array2<f64> {
        self.gw += &g_out.t().dot(&x);
        self.gb += &g_out.sum_axis(Axis(0));
        g_out.dot(&self.w)
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(0.0);
        self.gb.fill(0.0);
    }
}

/// 1-D convolution over a frame sequence, same-length output via zero
/// padding. Input rows are frames, columns are channels. The kernel is
/// stored flattened as [c_out, c_in·k] and applied through im2col, so both
/// passes are matrix products.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub gw: Array2<f64>,
    pub gb: Array1<f64>,
    c_in: usize,
    kernel: usize,
}

impl Conv1d {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        assert!(kernel % 2 == 1, "same-padding conv needs an odd kernel");
        let fan_in = c_in * kernel;
        Conv1d {
            w: kaiming_uniform(c_out, fan_in, fan_in, rng),
            b: Array1::zeros(c_out),
            gw: Array2::zeros((c_out, fan_in)),
            gb: Array1::zeros(c_out),
            c_in,
            kernel,
        }
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.w.nrows()
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// Kernel shape as [c_out, c_in, k] for reporting and checkpoints.
    pub fn w_shape(&self) -> Vec<usize> {
        vec![self.c_out(), self.c_in, self.kernel]
    }

    fn im2col(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (t, c) = x.dim();
        assert_eq!(c, self.c_in, "conv input has {c} channels, expected {}", self.c_in);
        let pad = self.kernel / 2;
        let mut col = Array2::zeros((t, self.c_in * self.kernel));
        for i in 0..t {
            for (tap, offset) in (-(pad as isize)..=pad as isize).enumerate() {
                let j = i as isize + offset;
                if j < 0 || j >= t as isize {
                    continue;
                }
                let src = x.row(j as usize);
                col.row_mut(i)
                    .slice_mut(ndarray::s![tap * self.c_in..(tap + 1) * self.c_in])
                    .assign(&src);
            }
        }
        col
    }

    /// `x`: [t, c_in] → output [t, c_out] plus the im2col buffer needed by
    /// the backward pass.
    pub fn forward(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let col = self.im2col(x);
        let y = col.dot(&self.w.t()) + &self.b;
        (y, col)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(
        &mut self,
        col: &Array2<f64>,
        g_out: ArrayView2<f64>,
    ) -> Array2<f64> {
        self.gw += &g_out.t().dot(col);
        self.gb += &g_out.sum_axis(Axis(0));
        let g_col = g_out.dot(&self.w);

        let t = g_out.nrows();
        let pad = self.kernel / 2;
        let mut g_x = Array2::zeros((t, self.c_in));
        for i in 0..t {
            for (tap, offset) in (-(pad as isize)..=pad as isize).enumerate() {
                let j = i as isize + offset;
                if j < 0 || j >= t as isize {
                    continue;
                }
                let chunk = g_col
                    .row(i)
                    .slice(ndarray::s![tap * self.c_in..(tap + 1) * self.c_in])
                    .to_owned();
                let mut dst = g_x.row_mut(j as usize);
                dst += &chunk;
            }
        }
        g_x
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(0.0);
        self.gb.fill(0.0);
    }
}

/// Elementwise max(x, 0); the mask holds 1 where the unit fired.
pub fn relu(x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    (x * &mask, mask)
}

pub fn relu_backward(g: &Array2<f64>, mask: &Array2<f64>) -> Array2<f64> {
    g * mask
}

/// Inverted-dropout mask: entries are 0 with probability p, else 1/(1−p),
/// so eval mode needs no rescaling.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut impl Rng) -> Array2<f64> {
    assert!((0.0..1.0).contains(&p), "dropout p must lie in [0, 1)");
    let keep = 1.0 - p;
    Array2::from_shape_fn((rows, cols), |_| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            1.0 / keep
        }
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
