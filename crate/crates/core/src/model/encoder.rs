use rand::Rng;

use super::{ForwardCtx, ModelConfig};
use crate::attention::MultiHeadAttention;
use crate::error::Result;
use crate::nn::{activation, dropout, join, maxpool1d, Activation, Conv1d, LayerNorm, Linear, Parameterized};
use crate::tensor::Tensor;

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Position-wise two-layer feed-forward block.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub w1: Linear,
    pub w2: Linear,
    pub activation: Activation,
}

impl FeedForward {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        FeedForward {
            w1: Linear::new(cfg.d_model, cfg.d_ff, true, rng),
            w2: Linear::new(cfg.d_ff, cfg.d_model, true, rng),
            activation: cfg.activation,
        }
    }

    pub fn forward(&self, x: &Tensor, rate: f64, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let h = activation(self.activation, &self.w1.forward(x)?);
        let h = dropout(&h, rate, ctx.training, &mut ctx.rng)?;
        dropout(&self.w2.forward(&h)?, rate, ctx.training, &mut ctx.rng)
    }
}

impl Parameterized for FeedForward {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.w1.collect_params(&join(prefix, "w1"), out);
        self.w2.collect_params(&join(prefix, "w2"), out);
    }
}

/// Self-attention sublayer and feed-forward sublayer, each residual and
/// followed by layer normalization.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub ff: FeedForward,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
    pub dropout: f64,
}

impl EncoderLayer {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        Ok(EncoderLayer {
            attention: MultiHeadAttention::new(cfg.d_model, cfg.n_heads, cfg.attention, cfg.factor, cfg.sparsity_mode, rng)?,
            ff: FeedForward::new(cfg, rng),
            norm1: LayerNorm::new(cfg.d_model, NORM_EPS),
            norm2: LayerNorm::new(cfg.d_model, NORM_EPS),
            dropout: cfg.dropout,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let a = self.attention.forward(x, x, false, &mut ctx.rng, &mut ctx.counter)?;
        let a = dropout(&a, self.dropout, ctx.training, &mut ctx.rng)?;
        let x = self.norm1.forward(&x.add(&a)?)?;
        let y = self.ff.forward(&x, self.dropout, ctx)?;
        self.norm2.forward(&x.add(&y)?)
    }
}

impl Parameterized for EncoderLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.attention.collect_params(&join(prefix, "attention"), out);
        self.ff.collect_params(&join(prefix, "ff"), out);
        self.norm1.collect_params(&join(prefix, "norm1"), out);
        self.norm2.collect_params(&join(prefix, "norm2"), out);
    }
}

/// Distilling step between encoder layers: kernel-3 convolution, ELU,
/// then max-pooling that halves the length (rounding up).
#[derive(Debug, Clone)]
pub struct DistilLayer {
    pub conv: Conv1d,
}

impl DistilLayer {
    pub fn new(d_model: usize, rng: &mut impl Rng) -> Self {
        DistilLayer { conv: Conv1d::new(d_model, d_model, 3, true, rng) }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        maxpool1d(&self.conv.forward(x)?.elu())
    }
}

impl Parameterized for DistilLayer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.conv.collect_params(&join(prefix, "conv"), out);
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub layers: Vec<EncoderLayer>,
    /// One fewer than `layers` when distilling, else empty.
    pub distil: Vec<DistilLayer>,
    pub norm: LayerNorm,
}

impl Encoder {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let layers = (0..cfg.e_layers).map(|_| EncoderLayer::new(cfg, rng)).collect::<Result<_>>()?;
        let distil = if cfg.distil {
            (1..cfg.e_layers).map(|_| DistilLayer::new(cfg.d_model, rng)).collect()
        } else {
            Vec::new()
        };
        Ok(Encoder { layers, distil, norm: LayerNorm::new(cfg.d_model, NORM_EPS) })
    }

    /// `[B, L, d_model] -> [B, L_out, d_model]`; records the length entering
    /// each layer in `ctx.encoder_lengths`.
    pub fn forward(&self, x: &Tensor, ctx: &mut ForwardCtx) -> Result<Tensor> {
        ctx.encoder_lengths.clear();
        let mut x = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            ctx.encoder_lengths.push(x.shape()[x.rank() - 2]);
            x = layer.forward(&x, ctx)?;
            if let Some(d) = self.distil.get(i) {
                x = d.forward(&x)?;
            }
        }
        self.norm.forward(&x)
    }
}

impl Parameterized for Encoder {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect_params(&join(prefix, &format!("layers.{i}")), out);
        }
        for (i, d) in self.distil.iter().enumerate() {
            d.collect_params(&join(prefix, &format!("distil.{i}")), out);
        }
        self.norm.collect_params(&join(prefix, "norm"), out);
    }
}
