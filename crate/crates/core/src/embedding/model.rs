use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [500, 125, 30];

/// Fully connected rectifier network mapping a shot descriptor into the
/// embedding space.
///
/// `weights[l]` is a row-major `layer_dims[l + 1] x layer_dims[l]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Whether the last layer is rectified like the hidden ones.
    #[serde(default = "default_true")]
    pub final_relu: bool,
}

fn default_true() -> bool {
    true
}

impl EmbeddingModel {
    pub fn zeros(layer_dims: &[usize], final_relu: bool) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!("invalid layer dims {layer_dims:?}")));
        }
        let weights = layer_dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_dims[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(EmbeddingModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            final_relu,
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot(layer_dims: &[usize], final_relu: bool, rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(layer_dims, final_relu)?;
        for (l, w) in m.weights.iter_mut().enumerate() {
            let limit = (6.0 / (layer_dims[l] + layer_dims[l + 1]) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for x in w.iter_mut() {
                *x = dist.sample(rng);
            }
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated dims")
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.layer_dims.len();
        if l < 2 || self.weights.len() != l - 1 || self.biases.len() != l - 1 {
            return Err(Error::shape(format!(
                "{} layer dims but {} weight and {} bias layers",
                l,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for i in 0..l - 1 {
            let (fan_in, fan_out) = (self.layer_dims[i], self.layer_dims[i + 1]);
            if self.weights[i].len() != fan_in * fan_out || self.biases[i].len() != fan_out {
                return Err(Error::shape(format!(
                    "layer {i} expects {fan_out}x{fan_in} weights and {fan_out} biases"
                )));
            }
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("model has non-finite parameters"));
        }
        Ok(())
    }

    fn rectified(&self, layer: usize) -> bool {
        layer + 1 < self.n_layers() || self.final_relu
    }

    /// `‖w‖²` over all weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.iter().flatten().map(|x| x * x).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Embeds `x`. With a mask, dropped hidden units are zeroed after the
    /// activation and the survivors scaled by `1 / keep`.
    pub fn forward(&self, x: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if let Some(m) = mask {
            m.check(self)?;
        }
        Ok(self.trace(x, mask).output().to_vec())
    }

    pub fn embed_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.forward(r, None)).collect()
    }

    /// Forward pass keeping every layer's pre- and post-activation values.
    pub(crate) fn trace(&self, x: &[f64], mask: Option<&DropoutMask>) -> Trace {
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        let mut pre = Vec::with_capacity(self.n_layers());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let fan_in = self.layer_dims[l];
            let input = &acts[l];
            let z: Vec<f64> = self.biases[l]
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let row = &self.weights[l][i * fan_in..(i + 1) * fan_in];
                    b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let mut a: Vec<f64> = if self.rectified(l) {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            if let Some(units) = mask.and_then(|m| m.layer(l)) {
                let scale = 1.0 / mask.expect("mask present").keep;
                for (v, &on) in a.iter_mut().zip(units) {
                    *v = if on { *v * scale } else { 0.0 };
                }
            }
            pre.push(z);
            acts.push(a);
        }
        Trace { acts, pre }
    }

    /// Back-propagates `grad_out` (gradient w.r.t. the output) through a
    /// recorded forward pass, accumulating parameter gradients into `grads`
    /// and returning the gradient w.r.t. the input when `want_input` is set.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        mask: Option<&DropoutMask>,
        grad_out: &[f64],
        grads: Option<&mut Gradients>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut grads = grads;
        let mut delta = grad_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            if let Some(units) = mask.and_then(|m| m.layer(l)) {
                let scale = 1.0 / mask.expect("mask present").keep;
                for (d, &on) in delta.iter_mut().zip(units) {
                    *d = if on { *d * scale } else { 0.0 };
                }
            }
            if self.rectified(l) {
                for (d, &z) in delta.iter_mut().zip(&trace.pre[l]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let fan_in = self.layer_dims[l];
            let input = &trace.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                for (i, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[l][i] += d;
                    let row = &mut g.weights[l][i * fan_in..(i + 1) * fan_in];
                    for (gw, &v) in row.iter_mut().zip(input) {
                        *gw += d * v;
                    }
                }
            }
            if l == 0 && !want_input {
                return None;
            }
            let mut next = vec![0.0; fan_in];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &self.weights[l][i * fan_in..(i + 1) * fan_in];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            delta = next;
        }
        Some(delta)
    }
}

pub(crate) struct Trace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input")
    }
}

/// Which hidden units survive dropout. Applied identically to every branch
/// that shares it.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: f64,
    /// One entry per hidden layer (every layer except the last).
    pub layers: Vec<Vec<bool>>,
}

impl DropoutMask {
    pub fn sample(model: &EmbeddingModel, keep: f64, rng: &mut impl Rng) -> Self {
        let layers = model.layer_dims[1..model.layer_dims.len() - 1]
            .iter()
            .map(|&n| (0..n).map(|_| rng.random::<f64>() < keep).collect())
            .collect();
        DropoutMask { keep, layers }
    }

    fn layer(&self, l: usize) -> Option<&[bool]> {
        self.layers.get(l).map(Vec::as_slice)
    }

    fn check(&self, model: &EmbeddingModel) -> Result<()> {
        let hidden = &model.layer_dims[1..model.layer_dims.len() - 1];
        if !(self.keep > 0.0 && self.keep <= 1.0)
            || self.layers.len() != hidden.len()
            || self.layers.iter().zip(hidden).any(|(m, &n)| m.len() != n)
        {
            return Err(Error::shape("dropout mask does not match the model's hidden layers"));
        }
        Ok(())
    }
}

/// Parameter-shaped accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &EmbeddingModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for x in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *x *= s;
        }
    }
}
