//! Small deterministic feedforward engine.
//!
//! Dense layers with per-layer activations, inverted dropout after hidden
//! activations, manual backpropagation and plain SGD. Everything the target
//! classifier, the contrastive encoder and the attack heads need, and nothing
//! else.

mod checkpoint;
mod ops;
mod optim;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use checkpoint::{read_network, write_network, NETWORK_MAGIC};
pub use ops::{dropout_apply, dropout_mask, log_sum_exp, softmax, softmax_cross_entropy};
pub use optim::{GradReduction, Sgd};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Architecture description. Hidden layers are every layer but the last;
/// `hidden_activations` and `dropout_rates` have one entry per hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
    pub output_activation: Activation,
    pub dropout_rates: Vec<f64>,
    pub seed: u64,
}

impl NetworkSpec {
    /// Multilayer perceptron with the same activation on every hidden layer,
    /// a linear output and no dropout.
    pub fn mlp(layer_sizes: &[usize], activation: Activation, seed: u64) -> Self {
        let hidden = layer_sizes.len().saturating_sub(2);
        NetworkSpec {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activations: vec![activation; hidden],
            output_activation: Activation::Identity,
            dropout_rates: vec![0.0; hidden],
            seed,
        }
    }

    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rates = vec![rate; self.hidden_layers()];
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len().saturating_sub(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::param("a network needs at least an input and an output size"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::param("layer sizes must be positive"));
        }
        let hidden = self.hidden_layers();
        if self.hidden_activations.len() != hidden {
            return Err(Error::shape(
                "hidden activations",
                hidden,
                self.hidden_activations.len(),
            ));
        }
        if self.dropout_rates.len() != hidden {
            return Err(Error::shape("dropout rates", hidden, self.dropout_rates.len()));
        }
        check_rates(&self.dropout_rates)
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    rates.iter().try_for_each(|&r| check_rate(r))
}

/// One affine layer; `weights` is row-major `n_out x n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn glorot<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let weights = (0..n_in * n_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Dense {
            n_in,
            n_out,
            weights,
            bias: vec![0.0; n_out],
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b
        }));
    }
}

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn next_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Dense>,
    /// Changes whenever parameters change; tapes record it.
    stamp: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

/// Activations cached by a forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    stamp: u64,
    /// Input to each layer (after dropout for layers > 0).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    /// Dropout scale factors per hidden layer; `None` when dropout was inactive.
    masks: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    fn check_congruent(&self, net: &Network) -> Result<()> {
        if self.layers.len() != net.layers.len() {
            return Err(Error::shape("gradient layers", net.layers.len(), self.layers.len()));
        }
        for (g, l) in self.layers.iter().zip(&net.layers) {
            if g.weights.len() != l.weights.len() {
                return Err(Error::shape("gradient weights", l.weights.len(), g.weights.len()));
            }
            if g.bias.len() != l.bias.len() {
                return Err(Error::shape("gradient bias", l.bias.len(), g.bias.len()));
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.bias.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

impl Network {
    /// Fresh network with seeded Glorot-uniform weights and zero biases.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::rng(spec.seed);
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], &mut rng))
            .collect();
        Ok(Network {
            spec,
            layers,
            stamp: next_stamp(),
        })
    }

    /// Build from explicit parameters.
    pub fn from_layers(spec: NetworkSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.depth() {
            return Err(Error::shape("layer count", spec.depth(), layers.len()));
        }
        for (l, w) in layers.iter().zip(spec.layer_sizes.windows(2)) {
            if l.n_in != w[0] || l.n_out != w[1] {
                return Err(Error::param(format!(
                    "layer shape {}x{} does not match spec {}x{}",
                    l.n_out, l.n_in, w[1], w[0]
                )));
            }
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(Error::param("parameter buffer length does not match layer shape"));
            }
        }
        let net = Network {
            spec,
            layers,
            stamp: next_stamp(),
        };
        if !net.parameters().all(f64::is_finite) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.stamp = next_stamp();
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// All parameters in layer order: weights row-major, then bias, per layer.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Forward pass. With `training` on, the spec's dropout rates are active
    /// and `rng` must be supplied whenever any rate is positive.
    pub fn forward(
        &self,
        input: &[f64],
        training: bool,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(Vec<f64>, Tape)> {
        if training {
            let rates = self.spec.dropout_rates.clone();
            self.forward_with_rates(input, &rates, rng)
        } else {
            self.forward_with_rates(input, &[], None)
        }
    }

    /// Forward pass with explicit per-hidden-layer dropout rates, independent
    /// of the rates in the spec. An empty slice disables dropout.
    pub fn forward_with_rates(
        &self,
        input: &[f64],
        rates: &[f64],
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(Vec<f64>, Tape)> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), input.len()));
        }
        let hidden = self.spec.hidden_layers();
        if !rates.is_empty() && rates.len() != hidden {
            return Err(Error::shape("dropout rates", hidden, rates.len()));
        }
        check_rates(rates)?;
        let active = rates.iter().any(|&r| r > 0.0);
        if active && rng.is_none() {
            return Err(Error::param("dropout is active but no random generator was supplied"));
        }

        let depth = self.layers.len();
        let mut tape = Tape {
            stamp: self.stamp,
            inputs: Vec::with_capacity(depth),
            pre: Vec::with_capacity(depth),
            masks: Vec::with_capacity(hidden),
        };
        let mut current = input.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.n_out);
            layer.affine(&current, &mut pre);
            let is_output = idx + 1 == depth;
            let act = if is_output {
                self.spec.output_activation
            } else {
                self.spec.hidden_activations[idx]
            };
            let mut out: Vec<f64> = pre.iter().map(|&z| act.apply(z)).collect();
            if !is_output {
                let rate = rates.get(idx).copied().unwrap_or(0.0);
                let mask = if rate > 0.0 {
                    let rng = rng.as_deref_mut().expect("checked above");
                    let mask = dropout_mask(out.len(), rate, rng)?;
                    out.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
                    Some(mask)
                } else {
                    None
                };
                tape.masks.push(mask);
            }
            tape.inputs.push(std::mem::replace(&mut current, out));
            tape.pre.push(pre);
        }
        Ok((current, tape))
    }

    /// Evaluation-mode output without a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), input.len()));
        }
        let depth = self.layers.len();
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            let act = if idx + 1 == depth {
                self.spec.output_activation
            } else {
                self.spec.hidden_activations[idx]
            };
            next.iter_mut().for_each(|z| *z = act.apply(*z));
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Exact gradients of a scalar loss whose gradient w.r.t. the output is
    /// `output_grad`. Returns the parameter gradients and the input gradient.
    pub fn backward_with_input(
        &self,
        tape: &Tape,
        output_grad: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        if tape.stamp != self.stamp {
            return Err(Error::Tape(
                "tape was recorded against different network parameters".into(),
            ));
        }
        if tape.inputs.len() != self.layers.len() || tape.pre.len() != self.layers.len() {
            return Err(Error::Tape("tape depth does not match network".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::shape("output gradient", self.output_dim(), output_grad.len()));
        }

        let depth = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = output_grad.to_vec();
        for idx in (0..depth).rev() {
            let layer = &self.layers[idx];
            let act = if idx + 1 == depth {
                self.spec.output_activation
            } else {
                self.spec.hidden_activations[idx]
            };
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&tape.pre[idx])
                .map(|(g, &z)| g * act.derivative(z))
                .collect();
            let input = &tape.inputs[idx];
            let g = &mut grads.layers[idx];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
                g.bias[o] += d;
            }
            let mut down = vec![0.0; layer.n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                down.iter_mut().zip(row).for_each(|(acc, w)| *acc += d * w);
            }
            if idx > 0 {
                if let Some(mask) = &tape.masks[idx - 1] {
                    down.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
                }
            }
            upstream = down;
        }
        Ok((grads, upstream))
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<Gradients> {
        self.backward_with_input(tape, output_grad).map(|(g, _)| g)
    }

    /// `theta <- theta - lr * g` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::param(format!("learning rate {lr} must be finite and >= 0")));
        }
        grads.check_congruent(self)?;
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        if lr == 0.0 {
            return Ok(());
        }
        for (l, g) in self.layers_mut().iter_mut().zip(&grads.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= lr * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
        }
        Ok(())
    }

    /// Set every parameter to zero (symmetric initialization).
    pub fn zero_parameters(&mut self) {
        for l in self.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Stable hash of the parameter bytes and spec.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        for p in self.parameters() {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
