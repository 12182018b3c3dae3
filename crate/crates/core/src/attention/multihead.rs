use rand::Rng;

use super::sparsity::{default_sample_count, top_u_count, SparsityMode};
use super::{full_attention, probsparse_attention, AttentionInputs, AttentionKind, DotProductCounter};
use crate::error::{Error, Result};
use crate::nn::{join, Linear, Parameterized};
use crate::tensor::Tensor;

/// Per-head projection, attention, concatenation and output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub n_heads: usize,
    pub kind: AttentionKind,
    /// `c` in `u = ceil(c ln L_Q)`.
    pub factor: f64,
    pub mode: SparsityMode,
}

impl MultiHeadAttention {
    pub fn new(
        d_model: usize,
        n_heads: usize,
        kind: AttentionKind,
        factor: f64,
        mode: SparsityMode,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_heads == 0 || !d_model.is_multiple_of(n_heads) {
            return Err(Error::Config(format!(
                "d_model {d_model} is not divisible by n_heads {n_heads}"
            )));
        }
        Ok(MultiHeadAttention {
            wq: Linear::new(d_model, d_model, true, rng),
            wk: Linear::new(d_model, d_model, true, rng),
            wv: Linear::new(d_model, d_model, true, rng),
            wo: Linear::new(d_model, d_model, true, rng),
            n_heads,
            kind,
            factor,
            mode,
        })
    }

    /// Assembles a block from explicit projections.
    pub fn from_parts(
        wq: Linear,
        wk: Linear,
        wv: Linear,
        wo: Linear,
        n_heads: usize,
        kind: AttentionKind,
        factor: f64,
        mode: SparsityMode,
    ) -> Result<Self> {
        let d_model = wq.out_dim();
        if n_heads == 0 || !d_model.is_multiple_of(n_heads) {
            return Err(Error::Config(format!(
                "d_model {d_model} is not divisible by n_heads {n_heads}"
            )));
        }
        Ok(MultiHeadAttention { wq, wk, wv, wo, n_heads, kind, factor, mode })
    }

    pub fn d_model(&self) -> usize {
        self.wq.out_dim()
    }

    /// `[B, L, d_model] -> [B, H, L, d_head]`
    fn split_heads(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        let (b, l) = (s[0], s[1]);
        let dh = self.d_model() / self.n_heads;
        x.reshape(&[b, l, self.n_heads, dh])?.permute(&[0, 2, 1, 3])
    }

    /// Attends `queries` `[B, L_Q, d_model]` (or `[L_Q, d_model]`) over
    /// `keys_values` `[B, L_K, d_model]`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        queries: &Tensor,
        keys_values: &Tensor,
        causal: bool,
        rng: &mut R,
        counter: &mut DotProductCounter,
    ) -> Result<Tensor> {
        let unbatched = queries.rank() == 2;
        let (xq, xkv) = if unbatched {
            let q = queries.reshape(&[1, queries.shape()[0], queries.shape()[1]])?;
            let kv = keys_values.reshape(&[1, keys_values.shape()[0], keys_values.shape()[1]])?;
            (q, kv)
        } else {
            (queries.clone(), keys_values.clone())
        };
        if xq.rank() != 3 || xkv.rank() != 3 || xq.shape()[0] != xkv.shape()[0] {
            return Err(Error::dim("multi_head", queries.shape(), keys_values.shape()));
        }
        let (b, lq) = (xq.shape()[0], xq.shape()[1]);

        let q = self.split_heads(&self.wq.forward(&xq)?)?;
        let k = self.split_heads(&self.wk.forward(&xkv)?)?;
        let v = self.split_heads(&self.wv.forward(&xkv)?)?;
        let inputs = AttentionInputs::new(q, k, v, causal)?;

        let heads = match self.kind {
            AttentionKind::Full => full_attention(&inputs, counter)?,
            AttentionKind::ProbSparse => {
                let u = top_u_count(self.factor, lq);
                let samples = default_sample_count(self.factor, inputs.len_k());
                probsparse_attention(&inputs, u, self.mode, samples, rng, counter)?.0
            }
        };
        let merged = heads.permute(&[0, 2, 1, 3])?.reshape(&[b, lq, self.d_model()])?;
        let out = self.wo.forward(&merged)?;
        if unbatched {
            out.reshape(&[lq, self.d_model()])
        } else {
            Ok(out)
        }
    }
}

impl Parameterized for MultiHeadAttention {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.wq.collect_params(&join(prefix, "wq"), out);
        self.wk.collect_params(&join(prefix, "wk"), out);
        self.wv.collect_params(&join(prefix, "wv"), out);
        self.wo.collect_params(&join(prefix, "wo"), out);
    }
}
