//! Layers composed by the Informer: linear, kernel-3 convolution,
//! max-pooling, layer normalization, dropout, activations and embeddings.

mod conv;
mod embedding;
mod linear;
mod norm;
mod pool;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use conv::Conv1d;
pub use embedding::{sinusoidal_encoding, Embedding};
pub use linear::Linear;
pub use norm::LayerNorm;
pub use pool::maxpool1d;

/// Anything owning trainable tensors. Names are dotted paths, unique
/// within a model.
pub trait Parameterized {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>);

    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.collect_params("", &mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Gelu,
    Relu,
}

pub fn activation(kind: Activation, x: &Tensor) -> Tensor {
    match kind {
        Activation::Elu => x.elu(),
        Activation::Gelu => x.gelu(),
        Activation::Relu => x.relu(),
    }
}

/// Inverted dropout: zeroes each element with probability `rate` and
/// rescales survivors by `1 / (1 - rate)`. Identity unless `training`.
pub fn dropout(x: &Tensor, rate: f64, training: bool, rng: &mut impl Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.numel())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    x.mul(&Tensor::from_vec(mask, x.shape())?)
}

pub(crate) fn uniform_param(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let n = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::parameter(data, shape).expect("shape matches data")
}

pub(crate) fn normal_param(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::parameter(data, shape).expect("shape matches data")
}
