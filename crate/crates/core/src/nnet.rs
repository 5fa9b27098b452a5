//! Dense multilayer perceptrons with hand-written reverse mode and Adam.
//!
//! Parameters live in one flat `Vec<f64>`; layer `l` occupies a row-major
//! weight block of shape `(out, in)` followed by its bias vector. Keeping the
//! storage flat lets the optimizer, gradient clipping and checkpointing treat
//! a network as a plain slice.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output sizes, got {:?}",
                layer_sizes
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {:?}",
                layer_sizes
            )));
        }
        if hidden_activation != Activation::Relu {
            return Err(Error::Config("hidden activation must be relu".into()));
        }
        if output_activation == Activation::Relu {
            return Err(Error::Config("output activation must be tanh or identity".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        })
    }

    /// Policy-mean network: ReLU hidden layers, tanh output.
    pub fn actor(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, Activation::Relu, Activation::Tanh)
    }

    /// Value network: ReLU hidden layers, scalar identity output.
    pub fn critic(input: usize, hidden: &[usize]) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self::new(sizes, Activation::Relu, Activation::Identity)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
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

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// Weights and biases of an [`MlpSpec`]. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    spec: MlpSpec,
    data: Vec<f64>,
    offsets: Vec<usize>,
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

fn layer_offsets(spec: &MlpSpec) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(spec.num_layers() + 1);
    let mut acc = 0;
    offsets.push(0);
    for w in spec.layer_sizes.windows(2) {
        acc += w[1] * w[0] + w[1];
        offsets.push(acc);
    }
    offsets
}

/// Uniform fan-in initialization with zero biases. Tanh-output (actor)
/// networks get their final layer shrunk by 0.01.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::zeros(spec.clone());
    let last = spec.num_layers() - 1;
    for l in 0..spec.num_layers() {
        let fan_in = spec.layer_sizes[l] as f64;
        let bound = (1.0 / fan_in).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let scale = if l == last && spec.output_activation == Activation::Tanh {
            0.01
        } else {
            1.0
        };
        for w in params.weights_mut(l) {
            *w = dist.sample(&mut rng) * scale;
        }
    }
    params
}

impl ParameterSet {
    pub fn zeros(spec: MlpSpec) -> Self {
        let offsets = layer_offsets(&spec);
        let data = vec![0.0; *offsets.last().unwrap()];
        Self {
            spec,
            data,
            offsets,
        }
    }

    pub fn from_flat(spec: MlpSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters for {:?}, got {}",
                spec.num_params(),
                spec.layer_sizes,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {} is {}", i, data[i])));
        }
        let offsets = layer_offsets(&spec);
        Ok(Self {
            spec,
            data,
            offsets,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec.clone())
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn dims(&self, layer: usize) -> (usize, usize) {
        (self.spec.layer_sizes[layer + 1], self.spec.layer_sizes[layer])
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (o, i) = self.dims(layer);
        let start = self.offsets[layer];
        &self.data[start..start + o * i]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (o, i) = self.dims(layer);
        let start = self.offsets[layer];
        &mut self.data[start..start + o * i]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (o, i) = self.dims(layer);
        let start = self.offsets[layer] + o * i;
        &self.data[start..start + o]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (o, i) = self.dims(layer);
        let start = self.offsets[layer] + o * i;
        &mut self.data[start..start + o]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Output only, without keeping the activation record.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for l in 0..self.spec.num_layers() {
            current = self.layer_forward(l, &current);
        }
        Ok(current)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.spec.num_layers() + 1);
        activations.push(input.to_vec());
        for l in 0..self.spec.num_layers() {
            let next = self.layer_forward(l, activations.last().unwrap());
            activations.push(next);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.spec.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (out, inp) = self.dims(l);
        let w = self.weights(l);
        let b = self.bias(l);
        let act = self.spec.activation(l);
        (0..out)
            .map(|r| {
                let row = &w[r * inp..(r + 1) * inp];
                let z = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[r];
                act.apply(z)
            })
            .collect()
    }

    /// Gradients of `<output_grad, output>` with respect to the parameters and
    /// the input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<(Self, Vec<f64>)> {
        let mut grads = self.zeros_like();
        let input_grad = self.backward_accumulate(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`backward`](Self::backward) but adds the parameter gradients into
    /// `grads`, which lets minibatch losses accumulate without reallocating.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut Self,
    ) -> Result<Vec<f64>> {
        let layers = self.spec.num_layers();
        if cache.activations.len() != layers + 1
            || cache
                .activations
                .iter()
                .zip(&self.spec.layer_sizes)
                .any(|(a, &n)| a.len() != n)
        {
            return Err(Error::Shape("activation record does not match network".into()));
        }
        if output_grad.len() != self.spec.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient has length {}, network output is {}",
                output_grad.len(),
                self.spec.output_dim()
            )));
        }
        if grads.spec != self.spec {
            return Err(Error::Shape("gradient buffer shaped for another network".into()));
        }

        let mut upstream = output_grad.to_vec();
        for l in (0..layers).rev() {
            let (out, inp) = self.dims(l);
            let act = self.spec.activation(l);
            let y = &cache.activations[l + 1];
            let x = &cache.activations[l];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(y)
                .map(|(g, &yv)| g * act.derivative_from_output(yv))
                .collect();

            let start = grads.offsets[l];
            let (gw, gb) = grads.data[start..start + out * inp + out].split_at_mut(out * inp);
            for r in 0..out {
                let d = dz[r];
                gb[r] += d;
                if d != 0.0 {
                    let row = &mut gw[r * inp..(r + 1) * inp];
                    for (g, &xv) in row.iter_mut().zip(x) {
                        *g += d * xv;
                    }
                }
            }

            let w = self.weights(l);
            let mut down = vec![0.0; inp];
            for r in 0..out {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                let row = &w[r * inp..(r + 1) * inp];
                for (acc, &wv) in down.iter_mut().zip(row) {
                    *acc += d * wv;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {:?}", self)))
        }
    }
}

/// Moment accumulators for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One bias-corrected descent step. A non-finite gradient leaves both the
    /// parameters and the state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam state has {} entries, params {} and grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("gradient entry {} is {}", i, grads[i])));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
