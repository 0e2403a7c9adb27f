//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Weights live in one flat vector in layer-major order: for each layer the
//! `n_in x n_out` weight matrix (row-major) followed by its `n_out` biases.
//! Hidden layers apply the configured activation; the output layer is linear.

mod adam;
mod gradcheck;
mod train;

pub use adam::Adam;
pub use gradcheck::{batch_loss, finite_diff_grad, grad_check, min_abs_preactivation, relative_error, GradCheckReport};
pub use train::{loss_and_grads, train, LossGrads, Sample, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed in terms of the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    weights: Vec<f64>,
    activation: Activation,
}

/// Cached forward pass over a batch, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input batch; `activations[l]` the output of layer `l`.
    activations: Vec<Array2<f64>>,
    /// Pre-activations of every layer (the last one equals the output).
    pre: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape holds at least the input")
    }

    pub fn preactivations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Number of parameters of a dense net with the given layer sizes.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// A net with every weight and bias set to zero.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(DenseNet {
            layer_sizes: layer_sizes.to_vec(),
            weights: vec![0.0; param_count(layer_sizes)],
            activation,
        })
    }

    pub fn from_weights(layer_sizes: &[usize], activation: Activation, weights: Vec<f64>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if weights.len() != expected {
            return Err(GeeseError::ShapeMismatch { expected, got: weights.len() });
        }
        Ok(DenseNet { layer_sizes: layer_sizes.to_vec(), weights, activation })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: rand::Rng + ?Sized>(layer_sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        for l in 0..net.num_layers() {
            let (n_in, n_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let (w, _) = net.layer_ranges(l);
            for v in &mut net.weights[w] {
                *v = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Index ranges of layer `l`'s weight matrix and bias vector.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mut offset = 0;
        for w in self.layer_sizes.windows(2).take(l) {
            offset += w[0] * w[1] + w[1];
        }
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let w_end = offset + n_in * n_out;
        (offset..w_end, w_end..w_end + n_out)
    }

    fn layer_view(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (w, b) = self.layer_ranges(l);
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let wv = ArrayView2::from_shape((n_in, n_out), &self.weights[w]).expect("layer shape");
        let bv = ArrayView1::from(&self.weights[b]);
        (wv, bv)
    }

    /// Multiply the output layer's weights and biases by `alpha`.
    pub fn scale_output_layer(&mut self, alpha: f64) {
        let (w, b) = self.layer_ranges(self.num_layers() - 1);
        for v in &mut self.weights[w.start..b.end] {
            *v *= alpha;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(xs)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(xs.ncols())?;
        let mut a = xs.to_owned();
        for l in 0..self.num_layers() {
            let (w, b) = self.layer_view(l);
            let mut z = a.dot(&w);
            z += &b;
            if l + 1 < self.num_layers() {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_tape(&self, xs: ArrayView2<'_, f64>) -> Result<Tape> {
        self.check_input(xs.ncols())?;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        let mut pre = Vec::with_capacity(self.num_layers());
        activations.push(xs.to_owned());
        for l in 0..self.num_layers() {
            let (w, b) = self.layer_view(l);
            let mut z = activations[l].dot(&w);
            z += &b;
            let a = if l + 1 < self.num_layers() {
                let act = self.activation;
                z.mapv(|v| act.apply(v))
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(a);
        }
        Ok(Tape { activations, pre })
    }

    /// Reverse pass. `upstream` is dL/d(output) for every batch row.
    /// Returns the weight gradient (when requested) and dL/d(input).
    pub fn backward(&self, tape: &Tape, upstream: ArrayView2<'_, f64>, want_weights: bool) -> (Option<Vec<f64>>, Array2<f64>) {
        let mut grad_w = want_weights.then(|| vec![0.0; self.weights.len()]);
        let mut delta = upstream.to_owned();
        for l in (0..self.num_layers()).rev() {
            let (w, _) = self.layer_view(l);
            if let Some(g) = grad_w.as_mut() {
                let (wr, br) = self.layer_ranges(l);
                let dw = tape.activations[l].t().dot(&delta);
                let db: Array1<f64> = delta.sum_axis(Axis(0));
                g[wr].iter_mut().zip(dw.iter()).for_each(|(o, v)| *o = *v);
                g[br].iter_mut().zip(db.iter()).for_each(|(o, v)| *o = *v);
            }
            let mut prev = delta.dot(&w.t());
            if l > 0 {
                let act = self.activation;
                prev.zip_mut_with(&tape.pre[l - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = prev;
        }
        (grad_w, delta)
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(GeeseError::ShapeMismatch { expected: self.input_dim(), got });
        }
        Ok(())
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(GeeseError::InvalidArgument("a net needs at least input and output sizes".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(GeeseError::InvalidArgument("layer sizes must be positive".into()));
    }
    Ok(())
}

/// Stack row vectors into a matrix.
pub fn stack_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * ncols);
    for r in rows {
        if r.len() != ncols {
            return Err(GeeseError::ShapeMismatch { expected: ncols, got: r.len() });
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat).expect("row-major stack"))
}
