//! Scaled dot-product attention: the full form, the ProbSparse form that
//! attends only for the top-u "active" queries, and a multi-head wrapper.
//!
//! All functions accept `[.., L, d]` tensors; leading dimensions (batch,
//! heads) are independent slices. Every query-key dot product performed is
//! tallied in a caller-owned [`DotProductCounter`].

mod bench;
mod multihead;
mod probsparse;
mod sparsity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use bench::{bench_attention, BenchRow};
pub use multihead::MultiHeadAttention;
pub use probsparse::{mean_fill, probsparse_attention};
pub use sparsity::{default_sample_count, select_top_u, sparsity_measure, top_u_count, SparsityMode, SparsityScores};

/// Additive score bias for masked positions.
pub const MASK_VALUE: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    Full,
    ProbSparse,
}

/// Query-key dot products performed, split by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotProductCounter {
    /// Products spent scoring query sparsity.
    pub measurement: u64,
    /// Products spent computing attention scores.
    pub attention: u64,
}

impl DotProductCounter {
    pub fn total(&self) -> u64 {
        self.measurement + self.attention
    }
}

/// Q `[.., L_Q, d]`, K `[.., L_K, d]`, V `[.., L_K, d_v]`.
#[derive(Debug, Clone)]
pub struct AttentionInputs {
    pub q: Tensor,
    pub k: Tensor,
    pub v: Tensor,
    pub causal: bool,
}

impl AttentionInputs {
    pub fn new(q: Tensor, k: Tensor, v: Tensor, causal: bool) -> Result<Self> {
        let inputs = AttentionInputs { q, k, v, causal };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        let (q, k, v) = (self.q.shape(), self.k.shape(), self.v.shape());
        let r = q.len();
        if r < 2 || k.len() != r || v.len() != r {
            return Err(Error::dim("attention", q, k));
        }
        if q[..r - 2] != k[..r - 2] || k[..r - 2] != v[..r - 2] {
            return Err(Error::dim("attention", q, v));
        }
        if q[r - 1] != k[r - 1] {
            return Err(Error::dim("attention", q, k));
        }
        if k[r - 2] != v[r - 2] {
            return Err(Error::dim("attention", k, v));
        }
        if self.causal && q[r - 2] != k[r - 2] {
            return Err(Error::Contract(format!(
                "causal attention needs L_Q == L_K, got {} and {}",
                q[r - 2],
                k[r - 2]
            )));
        }
        Ok(())
    }

    pub fn len_q(&self) -> usize {
        self.q.shape()[self.q.rank() - 2]
    }

    pub fn len_k(&self) -> usize {
        self.k.shape()[self.k.rank() - 2]
    }

    pub fn depth(&self) -> usize {
        self.q.shape()[self.q.rank() - 1]
    }

    /// Number of independent `[L, d]` slices.
    pub fn slices(&self) -> usize {
        self.q.numel() / (self.len_q() * self.depth())
    }
}

/// `[L_Q, L_K]` additive mask hiding keys after each query position.
pub(crate) fn causal_mask(len_q: usize, len_k: usize) -> Tensor {
    let mut data = vec![0.0; len_q * len_k];
    for i in 0..len_q {
        for j in (i + 1)..len_k {
            data[i * len_k + j] = MASK_VALUE;
        }
    }
    Tensor::from_vec(data, &[len_q, len_k]).expect("mask shape")
}

/// Softmax weights of the full attention, `[.., L_Q, L_K]`.
pub fn attention_weights(inputs: &AttentionInputs) -> Result<Tensor> {
    inputs.validate()?;
    let mut scores = inputs.q.matmul_nt(&inputs.k)?.scale(1.0 / (inputs.depth() as f64).sqrt());
    if inputs.causal {
        scores = scores.add(&causal_mask(inputs.len_q(), inputs.len_k()))?;
    }
    scores.softmax_lastdim()
}

/// `softmax(Q K^T / sqrt(d)) V`, with positions `j > i` masked when causal.
pub fn full_attention(inputs: &AttentionInputs, counter: &mut DotProductCounter) -> Result<Tensor> {
    let weights = attention_weights(inputs)?;
    counter.attention += (inputs.slices() * inputs.len_q() * inputs.len_k()) as u64;
    weights.matmul(&inputs.v)
}
