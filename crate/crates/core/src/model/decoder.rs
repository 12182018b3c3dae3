use rand::Rng;

use super::encoder::{FeedForward, NORM_EPS};
use super::{ForwardCtx, ModelConfig};
use crate::attention::{AttentionKind, MultiHeadAttention};
use crate::error::Result;
use crate::nn::{dropout, join, LayerNorm, Linear, Parameterized};
use crate::tensor::Tensor;

/// Causal self-attention, full cross-attention onto the encoder output,
/// feed-forward; each residual with layer normalization.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_attention: MultiHeadAttention,
    pub cross_attention: MultiHeadAttention,
    pub ff: FeedForward,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
    pub norm3: LayerNorm,
    pub dropout: f64,
}

impl DecoderLayer {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let (d, h) = (cfg.d_model, cfg.n_heads);
        Ok(DecoderLayer {
            self_attention: MultiHeadAttention::new(d, h, cfg.attention, cfg.factor, cfg.sparsity_mode, rng)?,
            cross_attention: MultiHeadAttention::new(d, h, AttentionKind::Full, cfg.factor, cfg.sparsity_mode, rng)?,
            ff: FeedForward::new(cfg, rng),
            norm1: LayerNorm::new(d, NORM_EPS),
            norm2: LayerNorm::new(d, NORM_EPS),
            norm3: LayerNorm::new(d, NORM_EPS),
            dropout: cfg.dropout,
        })
    }

    /// The masked self-attention sublayer alone (before cross-attention).
    pub fn self_block(&self, x: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let a = self.self_attention.forward(x, x, true, &mut ctx.rng, &mut ctx.counter)?;
        let a = dropout(&a, self.dropout, ctx.training, &mut ctx.rng)?;
        self.norm1.forward(&x.add(&a)?)
    }

    pub fn forward(&self, x: &Tensor, memory: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let x = self.self_block(x, ctx)?;
        let c = self.cross_attention.forward(&x, memory, false, &mut ctx.rng, &mut ctx.counter)?;
        let c = dropout(&c, self.dropout, ctx.training, &mut ctx.rng)?;
        let x = self.norm2.forward(&x.add(&c)?)?;
        let y = self.ff.forward(&x, self.dropout, ctx)?;
        self.norm3.forward(&x.add(&y)?)
    }
}

impl Parameterized for DecoderLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.self_attention.collect_params(&join(prefix, "self_attention"), out);
        self.cross_attention.collect_params(&join(prefix, "cross_attention"), out);
        self.ff.collect_params(&join(prefix, "ff"), out);
        self.norm1.collect_params(&join(prefix, "norm1"), out);
        self.norm2.collect_params(&join(prefix, "norm2"), out);
        self.norm3.collect_params(&join(prefix, "norm3"), out);
    }
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub layers: Vec<DecoderLayer>,
    pub norm: LayerNorm,
    pub head: Linear,
    pub pred_len: usize,
}

impl Decoder {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        Ok(Decoder {
            layers: (0..cfg.d_layers).map(|_| DecoderLayer::new(cfg, rng)).collect::<Result<_>>()?,
            norm: LayerNorm::new(cfg.d_model, NORM_EPS),
            head: Linear::new(cfg.d_model, cfg.c_out, true, rng),
            pred_len: cfg.pred_len,
        })
    }

    /// One pass over the whole `[B, L_token + L_y, d_model]` decoder input;
    /// returns the last `L_y` rows projected to `[B, L_y, c_out]`.
    pub fn forward(&self, x: &Tensor, memory: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        ctx.decoder_invocations += 1;
        let mut x = x.clone();
        for layer in &self.layers {
            x = layer.forward(&x, memory, ctx)?;
        }
        let y = self.head.forward(&self.norm.forward(&x)?)?;
        let len = y.shape()[1];
        y.narrow(1, len - self.pred_len, self.pred_len)
    }
}

impl Parameterized for Decoder {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect_params(&join(prefix, &format!("layers.{i}")), out);
        }
        self.norm.collect_params(&join(prefix, "norm"), out);
        self.head.collect_params(&join(prefix, "head"), out);
    }
}
