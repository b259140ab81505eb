//! A from-scratch feedforward network: forward pass, backpropagation,
//! minibatch SGD training and evaluation metrics.
//!
//! Layers are dense, weights are stored row-major as `outputs × inputs`, and
//! every hidden layer applies the same activation. The output layer applies
//! its own activation, which is the identity for the sensitivity models and
//! may be anything for file-loaded controllers.

mod io;
mod metrics;
mod model;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{LayerFile, ModelMeta, NetworkFile};
pub use metrics::{evaluate, evaluate_model, Metrics};
pub use model::{SensitivityModel, SensitivityNet};
pub use train::{train, train_samples, Init, Loss, Samples, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a = apply(z)`
    /// (and `z` for relu, whose kink is assigned derivative 0).
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// One affine layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::Parse("layer with zero width".into()));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::dim("layer weights", inputs * outputs, weights.len()));
        }
        if bias.len() != outputs {
            return Err(Error::dim("layer bias", outputs, bias.len()));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.inputs..(i + 1) * self.inputs]
    }

    #[inline]
    fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.bias[i] + dot(self.row(i), x);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums so the loop vectorizes without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Layered feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &Mlp) -> Self {
        Self {
            weights: m.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: m.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Flattened in the same order as [`Mlp::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct Trace {
    // pre[l], post[l]: pre-activation and activation of layer l.
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Mlp {
    /// Checks that layer widths chain.
    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Parse("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::dim(
                    format!("layer {} input width", i + 1),
                    pair[0].outputs,
                    pair[1].inputs,
                ));
            }
        }
        Ok(Self {
            layers,
            hidden,
            output,
        })
    }

    /// Randomly initialized network with the given layer widths
    /// (`widths[0]` is the input width, the last entry the output width).
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| init.layer(w[0], w[1], i == last, rng))
            .collect();
        Self::from_layers(layers, hidden, Activation::Identity)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(Error::dim("network input", self.input_width(), input.len()));
        }
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(l);
            let mut y = vec![0.0; layer.outputs];
            layer.affine_into(&x, &mut y);
            for v in &mut y {
                *v = act.apply(*v);
            }
            x = y;
        }
        Ok(x)
    }

    fn forward_trace(&self, input: &[f64], trace: &mut Trace) {
        for l in 0..self.layers.len() {
            let act = self.activation_of(l);
            let (before, after) = trace.post.split_at_mut(l);
            let x: &[f64] = if l == 0 { input } else { &before[l - 1] };
            let pre = &mut trace.pre[l];
            self.layers[l].affine_into(x, pre);
            for (a, z) in after[0].iter_mut().zip(pre.iter()) {
                *a = act.apply(*z);
            }
        }
    }

    pub(crate) fn new_trace(&self) -> Trace {
        Trace {
            pre: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            post: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    /// Exact gradients of the mean loss over `batch` with respect to every
    /// weight and bias, together with the loss value.
    ///
    /// The loss averages over all `batch.len() × output_width` elements.
    pub fn gradient(&self, batch: &[(&[f64], &[f64])], loss: Loss) -> Result<(Gradients, f64)> {
        let mut grads = Gradients::zeros_like(self);
        let mut trace = self.new_trace();
        let total = self.accumulate(batch, loss, &mut grads, &mut trace)?;
        Ok((grads, total))
    }

    pub(crate) fn accumulate(
        &self,
        batch: &[(&[f64], &[f64])],
        loss: Loss,
        grads: &mut Gradients,
        trace: &mut Trace,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let n_out = self.output_width();
        let denom = (batch.len() * n_out) as f64;
        let depth = self.layers.len();
        let max_width = self.layers.iter().map(|l| l.outputs).max().unwrap_or(0);
        let mut delta = vec![0.0; max_width];
        let mut delta_prev = vec![0.0; max_width.max(self.input_width())];
        let mut total = 0.0;

        for (input, target) in batch {
            if input.len() != self.input_width() {
                return Err(Error::dim("network input", self.input_width(), input.len()));
            }
            if target.len() != n_out {
                return Err(Error::dim("network target", n_out, target.len()));
            }
            self.forward_trace(input, trace);

            // dL/d(output activation)
            let out = &trace.post[depth - 1];
            for k in 0..n_out {
                let e = out[k] - target[k];
                total += loss.value(e);
                delta[k] = loss.derivative(e) / denom;
            }

            for l in (0..depth).rev() {
                let layer = &self.layers[l];
                let act = self.activation_of(l);
                let pre = &trace.pre[l];
                let post = &trace.post[l];
                for i in 0..layer.outputs {
                    delta[i] *= act.derivative(pre[i], post[i]);
                }
                let x: &[f64] = if l == 0 { input } else { &trace.post[l - 1] };
                let gw = &mut grads.weights[l];
                let gb = &mut grads.bias[l];
                for i in 0..layer.outputs {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    gb[i] += d;
                    axpy(d, x, &mut gw[i * layer.inputs..(i + 1) * layer.inputs]);
                }
                if l > 0 {
                    let prev = &mut delta_prev[..layer.inputs];
                    prev.fill(0.0);
                    for i in 0..layer.outputs {
                        let d = delta[i];
                        if d != 0.0 {
                            axpy(d, layer.row(i), prev);
                        }
                    }
                    delta[..layer.inputs].copy_from_slice(prev);
                }
            }
        }
        Ok(total / denom)
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim("parameter vector", self.param_count(), params.len()));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub(crate) fn apply_update(&mut self, velocity: &Gradients) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, v) in layer.weights.iter_mut().zip(&velocity.weights[l]) {
                *w += v;
            }
            for (b, v) in layer.bias.iter_mut().zip(&velocity.bias[l]) {
                *b += v;
            }
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}
