//! Multilayer perceptrons with manual backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PpoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Range actions are clipped to after sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    /// No clipping (critic output).
    None,
    /// Muscle excitations in [0, 1].
    Unit,
    /// Normalized torques in [-1, 1].
    Symmetric,
}

impl Squash {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Squash::None => x,
            Squash::Unit => x.clamp(0.0, 1.0),
            Squash::Symmetric => x.clamp(-1.0, 1.0),
        }
    }
}

/// Fully connected network stored as one flat parameter vector.
///
/// Layout per layer: weights row-major `[n_out][n_in]`, then biases; the
/// state-independent log-std vector (actors only) sits at the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    dims: Vec<usize>,
    params: Vec<f64>,
    n_log_std: usize,
    activation: Activation,
    squash: Squash,
}

/// Per-layer outputs kept for the backward pass. `acts[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn layer_size(n_in: usize, n_out: usize) -> usize {
    n_in * n_out + n_out
}

impl PolicyNet {
    /// Build from raw parts, validating the parameter count.
    pub fn from_parts(
        dims: Vec<usize>,
        params: Vec<f64>,
        n_log_std: usize,
        activation: Activation,
        squash: Squash,
    ) -> Result<Self, PpoError> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(PpoError::Shape(format!("bad layer dims {dims:?}")));
        }
        if n_log_std != 0 && n_log_std != *dims.last().unwrap() {
            return Err(PpoError::Shape("log-std length must match output".into()));
        }
        let expected = Self::param_count(&dims) + n_log_std;
        if params.len() != expected {
            return Err(PpoError::Shape(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            dims,
            params,
            n_log_std,
            activation,
            squash,
        })
    }

    fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| layer_size(w[0], w[1])).sum()
    }

    /// Uniform fan-in scaled initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// with the output layer further scaled by `output_scale`. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        hidden: &[usize],
        n_out: usize,
        squash: Squash,
        log_std_init: Option<f64>,
        output_scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![n_in];
        dims.extend_from_slice(hidden);
        dims.push(n_out);
        let n_layers = dims.len() - 1;
        let mut params = Vec::with_capacity(Self::param_count(&dims) + n_out);
        for (l, w) in dims.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if l + 1 == n_layers { output_scale } else { 1.0 };
            for _ in 0..w[0] * w[1] {
                params.push(rng.random_range(-bound..bound) * scale);
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        let n_log_std = match log_std_init {
            Some(v) => {
                params.extend(std::iter::repeat_n(v, n_out));
                n_out
            }
            None => 0,
        };
        Self {
            dims,
            params,
            n_log_std,
            activation: Activation::Tanh,
            squash,
        }
    }

    /// Human actor: hidden sizes [256, 128], excitations clipped to [0, 1].
    pub fn human_actor<R: Rng + ?Sized>(n_in: usize, n_muscles: usize, rng: &mut R) -> Self {
        Self::init(n_in, &[256, 128], n_muscles, Squash::Unit, Some(-0.5), 0.01, rng)
    }

    /// Exoskeleton actor: hidden sizes [128, 64], two torques clipped to [-1, 1].
    pub fn exo_actor<R: Rng + ?Sized>(n_in: usize, rng: &mut R) -> Self {
        Self::init(n_in, &[128, 64], 2, Squash::Symmetric, Some(-0.5), 0.01, rng)
    }

    /// Shared critic: hidden sizes [256, 128], scalar value.
    pub fn critic<R: Rng + ?Sized>(n_in: usize, rng: &mut R) -> Self {
        Self::init(n_in, &[256, 128], 1, Squash::None, None, 1.0, rng)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_in(&self) -> usize {
        self.dims[0]
    }

    pub fn n_out(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_log_std(&self) -> usize {
        self.n_log_std
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.params.len() - self.n_log_std..]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn set_activation(&mut self, activation: Activation) {
        self.activation = activation;
    }

    pub fn squash(&self) -> Squash {
        self.squash
    }

    pub fn is_actor(&self) -> bool {
        self.n_log_std > 0
    }

    /// Offset of layer `l`'s weights and of its biases.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.dims[..=l]
            .windows(2)
            .map(|w| layer_size(w[0], w[1]))
            .sum();
        (start, start + self.dims[l] * self.dims[l + 1])
    }

    fn check_input(&self, obs: &[f64]) -> Result<(), PpoError> {
        if obs.len() == self.n_in() {
            Ok(())
        } else {
            Err(PpoError::DimensionMismatch {
                expected: self.n_in(),
                got: obs.len(),
            })
        }
    }

    /// Raw network output: the action mean for actors, the value for the critic.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>, PpoError> {
        let mut cache = ForwardCache::default();
        self.forward_cached(obs, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Critic value of one observation.
    pub fn value(&self, obs: &[f64]) -> Result<f64, PpoError> {
        Ok(self.forward(obs)?[0])
    }

    /// Forward pass that keeps every layer output for [`PolicyNet::backward`].
    pub fn forward_cached(&self, obs: &[f64], cache: &mut ForwardCache) -> Result<(), PpoError> {
        self.check_input(obs)?;
        let n_layers = self.dims.len() - 1;
        cache.acts.resize_with(n_layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(obs);
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w0, b0) = self.offsets(l);
            let weights = &self.params[w0..b0];
            let bias = &self.params[b0..b0 + n_out];
            let last = l + 1 == n_layers;
            let (inputs, rest) = cache.acts.split_at_mut(l + 1);
            let x = &inputs[l];
            let out = &mut rest[0];
            out.clear();
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let mut z = bias[j];
                for (w, xi) in row.iter().zip(x) {
                    z += w * xi;
                }
                out.push(if last { z } else { self.activation.apply(z) });
            }
        }
        Ok(())
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    /// The log-std gradient is not touched here.
    pub fn backward(&self, cache: &mut ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.dims.len() - 1;
        cache.delta.clear();
        cache.delta.extend_from_slice(d_out);
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w0, b0) = self.offsets(l);
            if l + 1 != n_layers {
                for (d, y) in cache.delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= self.activation.grad_from_output(*y);
                }
            }
            let x = &cache.acts[l];
            for j in 0..n_out {
                let d = cache.delta[j];
                grad[b0 + j] += d;
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[w0 + j * n_in..w0 + (j + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += d * xi;
                }
            }
            if l > 0 {
                cache.delta_prev.clear();
                cache.delta_prev.resize(n_in, 0.0);
                let weights = &self.params[w0..b0];
                for j in 0..n_out {
                    let d = cache.delta[j];
                    let row = &weights[j * n_in..(j + 1) * n_in];
                    for (p, w) in cache.delta_prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                std::mem::swap(&mut cache.delta, &mut cache.delta_prev);
            }
        }
    }

    /// Widen the input by `n_new` dimensions. Existing weights are kept bit for bit;
    /// the new input columns are drawn from `U(-init_scale, init_scale)`.
    pub fn augment_input<R: Rng + ?Sized>(
        &self,
        n_new: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Result<Self, PpoError> {
        if n_new == 0 {
            return Err(PpoError::Shape("augment_input needs n_new >= 1".into()));
        }
        let (n_in, n_out) = (self.dims[0], self.dims[1]);
        let (_, b0) = self.offsets(0);
        let mut params = Vec::with_capacity(self.params.len() + n_new * n_out);
        for j in 0..n_out {
            params.extend_from_slice(&self.params[j * n_in..(j + 1) * n_in]);
            for _ in 0..n_new {
                params.push(if init_scale > 0.0 {
                    rng.random_range(-init_scale..init_scale)
                } else {
                    0.0
                });
            }
        }
        params.extend_from_slice(&self.params[b0..]);
        let mut dims = self.dims.clone();
        dims[0] += n_new;
        Self::from_parts(dims, params, self.n_log_std, self.activation, self.squash)
    }
}
