//! Feedforward multilayer perceptron with batch backpropagation.
//!
//! Batch losses and gradients accumulate per fixed-size sample chunk; chunk
//! partials are materialized in order and folded sequentially, so values are
//! bit-identical whatever the thread count.

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Neuron activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `1 / (1 + exp(-z))`.
    LogSigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LogSigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::LogSigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Layer sizes plus activations; the part of a network that training needs
/// besides the flat parameter vector.
#[derive(Clone, Debug)]
pub(crate) struct NetShape {
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl NetShape {
    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layer_count() {
            self.output
        } else {
            self.hidden
        }
    }

    /// (weight offset, bias offset) of a layer inside the flat parameters.
    fn offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        (off, off + self.sizes[layer + 1] * self.sizes[layer])
    }

    /// Forward pass for one sample; `acts[l]` receives layer `l`'s output,
    /// with `acts[0]` the input itself.
    pub fn forward_sample(&self, params: &[f64], input: &[f64], acts: &mut [Vec<f64>]) {
        acts[0].copy_from_slice(input);
        for layer in 0..self.layer_count() {
            let (w_off, b_off) = self.offsets(layer);
            let n_in = self.sizes[layer];
            let n_out = self.sizes[layer + 1];
            let act = self.activation_of(layer);
            let (prev, rest) = acts.split_at_mut(layer + 1);
            let a_in = &prev[layer];
            let a_out = &mut rest[0];
            for j in 0..n_out {
                let w = &params[w_off + j * n_in..w_off + (j + 1) * n_in];
                let mut z = params[b_off + j];
                for (wi, ai) in w.iter().zip(a_in.iter()) {
                    z += wi * ai;
                }
                a_out[j] = act.apply(z);
            }
        }
    }

    fn new_activation_buffers(&self) -> Vec<Vec<f64>> {
        self.sizes.iter().map(|&s| vec![0.0; s]).collect()
    }

    /// Mean over samples of the summed squared output error.
    pub fn loss(&self, params: &[f64], x: &Matrix, y: &Matrix, sequential: bool) -> f64 {
        let n = x.rows();
        let chunks = n.div_ceil(exec::CHUNK);
        let partial = |ci: usize| {
            let lo = ci * exec::CHUNK;
            let hi = (lo + exec::CHUNK).min(n);
            let mut acts = self.new_activation_buffers();
            let mut acc = 0.0;
            for s in lo..hi {
                self.forward_sample(params, x.row(s), &mut acts);
                let out = acts.last().unwrap();
                for (o, t) in out.iter().zip(y.row(s)) {
                    let e = o - t;
                    acc += e * e;
                }
            }
            acc
        };
        let partials = if sequential {
            exec::map_indexed_seq(chunks, partial)
        } else {
            exec::map_indexed(chunks, partial)
        };
        partials.iter().sum::<f64>() / n as f64
    }

    /// Gradient of [`loss`](Self::loss) with respect to every parameter.
    pub fn gradient_into(
        &self,
        params: &[f64],
        x: &Matrix,
        y: &Matrix,
        out: &mut [f64],
        sequential: bool,
    ) {
        let n = x.rows();
        let dim = self.param_count();
        debug_assert_eq!(out.len(), dim);
        let chunks = n.div_ceil(exec::CHUNK);
        let partial = |ci: usize| {
            let lo = ci * exec::CHUNK;
            let hi = (lo + exec::CHUNK).min(n);
            let mut acts = self.new_activation_buffers();
            let mut deltas = self.new_activation_buffers();
            let mut grad = vec![0.0; dim];
            for s in lo..hi {
                self.forward_sample(params, x.row(s), &mut acts);
                self.accumulate_sample(params, &acts, y.row(s), &mut deltas, &mut grad);
            }
            grad
        };
        let partials = if sequential {
            exec::map_indexed_seq(chunks, partial)
        } else {
            exec::map_indexed(chunks, partial)
        };
        out.fill(0.0);
        for p in &partials {
            for (o, g) in out.iter_mut().zip(p) {
                *o += g;
            }
        }
        let scale = 2.0 / n as f64;
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    /// Backpropagates one sample's error into `grad` (unscaled).
    fn accumulate_sample(
        &self,
        params: &[f64],
        acts: &[Vec<f64>],
        target: &[f64],
        deltas: &mut [Vec<f64>],
        grad: &mut [f64],
    ) {
        let last = self.layer_count();
        {
            let act = self.activation_of(last - 1);
            let out = &acts[last];
            let d = &mut deltas[last];
            for j in 0..out.len() {
                d[j] = (out[j] - target[j]) * act.derivative_from_output(out[j]);
            }
        }
        for layer in (0..last).rev() {
            let (w_off, b_off) = self.offsets(layer);
            let n_in = self.sizes[layer];
            let n_out = self.sizes[layer + 1];
            let (lower, upper) = deltas.split_at_mut(layer + 1);
            let d_out = &upper[0];
            let a_in = &acts[layer];
            for j in 0..n_out {
                let dj = d_out[j];
                let gw = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (g, ai) in gw.iter_mut().zip(a_in.iter()) {
                    *g += dj * ai;
                }
                grad[b_off + j] += dj;
            }
            if layer > 0 {
                let act = self.activation_of(layer - 1);
                let d_in = &mut lower[layer];
                for (i, di) in d_in.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n_out {
                        acc += params[w_off + j * n_in + i] * d_out[j];
                    }
                    *di = acc * act.derivative_from_output(a_in[i]);
                }
            }
        }
    }
}

/// A feedforward network: log-sigmoid hidden layers and a configurable
/// output activation. Immutable for inference; training drives it through
/// the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    /// One `(out x in)` row-major matrix per layer.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl MlpNetwork {
    /// All-zero network with a linear output layer.
    pub fn zeroed(layer_sizes: &[usize]) -> Result<Self> {
        Self::build(layer_sizes, Activation::Linear, |_, _| 0.0)
    }

    /// Seeded uniform initialization in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
    /// The same seed always yields a bit-identical network.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(layer_sizes, Activation::Linear, |fan_in, rng_call| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            rng_call(&mut rng, bound)
        })
    }

    fn build(
        layer_sizes: &[usize],
        output_activation: Activation,
        mut draw: impl FnMut(usize, &mut dyn FnMut(&mut ChaCha8Rng, f64) -> f64) -> f64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "network needs at least input and output layers".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut sample = |fan_in: usize| {
            draw(fan_in, &mut |rng, bound| rng.random_range(-bound..=bound))
        };
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let mut m = Matrix::zeros(n_out, n_in);
            for j in 0..n_out {
                for i in 0..n_in {
                    m.set(j, i, sample(n_in));
                }
            }
            let b: Vec<f64> = (0..n_out).map(|_| sample(n_in)).collect();
            weights.push(m);
            biases.push(b);
        }
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation: Activation::LogSigmoid,
            output_activation,
            weights,
            biases,
        })
    }

    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn shape(&self) -> NetShape {
        NetShape {
            sizes: self.layer_sizes.clone(),
            hidden: self.hidden_activation,
            output: self.output_activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.shape().param_count()
    }

    /// Flattens parameters layer by layer: weights row-major, then biases.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                self.param_count()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (rows, cols) = (w.rows(), w.cols());
            for j in 0..rows {
                for i in 0..cols {
                    w.set(j, i, params[off + j * cols + i]);
                }
            }
            off += rows * cols;
            b.copy_from_slice(&params[off..off + rows]);
            off += rows;
        }
        Ok(())
    }

    /// Forward pass returning the output and every layer's activations
    /// (`cache[0]` is the input, `cache.last()` the output).
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if input.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_size()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let shape = self.shape();
        let mut acts = shape.new_activation_buffers();
        shape.forward_sample(&self.to_params(), input, &mut acts);
        Ok((acts.last().unwrap().clone(), acts))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, network expects {}",
                x.cols(),
                self.input_size()
            )));
        }
        let shape = self.shape();
        let params = self.to_params();
        let rows = exec::map_indexed(x.rows(), |i| {
            let mut acts = shape.new_activation_buffers();
            shape.forward_sample(&params, x.row(i), &mut acts);
            acts.last().unwrap().clone()
        });
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.output_size()));
        }
        Matrix::from_rows(&rows)
    }

    /// Batch mean squared error over output components.
    pub fn loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        self.check_batch(x, y)?;
        Ok(self.shape().loss(&self.to_params(), x, y, false))
    }

    /// Batch gradient of the loss for every weight and bias, in
    /// [`to_params`](Self::to_params) order.
    pub fn gradient(&self, x: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
        self.check_batch(x, y)?;
        let mut out = vec![0.0; self.param_count()];
        self.shape()
            .gradient_into(&self.to_params(), x, y, &mut out, false);
        Ok(out)
    }

    pub(crate) fn check_batch(&self, x: &Matrix, y: &Matrix) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::Data("empty training batch".into()));
        }
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "batch has {} inputs, network expects {}",
                x.cols(),
                self.input_size()
            )));
        }
        if y.cols() != self.output_size() || y.rows() != x.rows() {
            return Err(Error::Shape(format!(
                "targets are {}x{}, expected {}x{}",
                y.rows(),
                y.cols(),
                x.rows(),
                self.output_size()
            )));
        }
        if x.data().iter().chain(y.data()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training data".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: MlpNetwork =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("network JSON: {e}")))?;
        if net.layer_sizes.len() < 2
            || net.weights.len() != net.layer_sizes.len() - 1
            || net.biases.len() != net.weights.len()
        {
            return Err(Error::Data("network JSON has inconsistent layers".into()));
        }
        for (l, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
            if w.rows() != net.layer_sizes[l + 1]
                || w.cols() != net.layer_sizes[l]
                || b.len() != net.layer_sizes[l + 1]
            {
                return Err(Error::Data(format!(
                    "layer {l} weights are {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    net.layer_sizes[l + 1],
                    net.layer_sizes[l]
                )));
            }
        }
        Ok(net)
    }
}
