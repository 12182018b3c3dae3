//! Informer encoder/decoder and the comparison networks.

mod config;
mod decoder;
mod embed;
mod encoder;
mod lstm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{ModelConfig, ModelVariant};
pub use decoder::{Decoder, DecoderLayer};
pub use embed::{DataEmbedding, TemporalEmbedding};
pub use encoder::{DistilLayer, Encoder, EncoderLayer, FeedForward};
pub use lstm::LstmBaseline;

use crate::attention::DotProductCounter;
use crate::data::{TimeStamp, WindowBatch};
use crate::error::{Error, Result};
use crate::nn::{join, Parameterized};
use crate::tensor::{no_grad, Tensor};

/// Per-forward mutable state: mode flag, randomness for dropout and key
/// sampling, and instrumentation.
#[derive(Debug, Clone)]
pub struct ForwardCtx {
    pub training: bool,
    pub rng: ChaCha8Rng,
    pub counter: DotProductCounter,
    pub decoder_invocations: usize,
    /// Length entering each encoder layer, from the last forward.
    pub encoder_lengths: Vec<usize>,
}

impl ForwardCtx {
    pub fn new(training: bool, seed: u64) -> Self {
        ForwardCtx {
            training,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: DotProductCounter::default(),
            decoder_invocations: 0,
            encoder_lengths: Vec::new(),
        }
    }

    pub fn eval(seed: u64) -> Self {
        Self::new(false, seed)
    }

    pub fn train(seed: u64) -> Self {
        Self::new(true, seed)
    }
}

/// Decoder input: the guiding token rows followed by `L_y` zero rows that
/// carry the true future time stamps. Returns `[B, L_token + L_y, dec_in]`
/// and the matching `B * (L_token + L_y)` stamps.
pub fn build_decoder_input(batch: &WindowBatch, cfg: &ModelConfig) -> Result<(Tensor, Vec<TimeStamp>)> {
    let g = batch.geometry;
    if g != cfg.geometry() {
        return Err(Error::Alignment(format!("window geometry {g:?} does not match model {:?}", cfg.geometry())));
    }
    let b = batch.batch_size();
    let (lt, ly, c) = (g.label_len, g.pred_len, cfg.dec_in);
    if batch.future_stamps.len() != b * ly {
        return Err(Error::Alignment(format!(
            "{} future stamps for {b} windows of horizon {ly}",
            batch.future_stamps.len()
        )));
    }
    if batch.token_values.len() != b * lt * c {
        return Err(Error::Alignment(format!("token rows do not match {b} x {lt} x {c}")));
    }
    let token_stamps = batch.token_stamps();
    let mut values = Vec::with_capacity(b * (lt + ly) * c);
    let mut stamps = Vec::with_capacity(b * (lt + ly));
    for i in 0..b {
        values.extend_from_slice(&batch.token_values[i * lt * c..(i + 1) * lt * c]);
        values.extend(std::iter::repeat_n(0.0, ly * c));
        stamps.extend_from_slice(&token_stamps[i * lt..(i + 1) * lt]);
        stamps.extend_from_slice(&batch.future_stamps[i * ly..(i + 1) * ly]);
    }
    Ok((Tensor::from_vec(values, &[b, lt + ly, c])?, stamps))
}

/// Embedding, distilling encoder and one-shot generative decoder.
#[derive(Debug, Clone)]
pub struct Informer {
    pub config: ModelConfig,
    pub enc_embedding: DataEmbedding,
    pub dec_embedding: DataEmbedding,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl Informer {
    pub fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Informer {
            config: cfg.clone(),
            enc_embedding: DataEmbedding::new(cfg.enc_in, cfg, rng),
            dec_embedding: DataEmbedding::new(cfg.dec_in, cfg, rng),
            encoder: Encoder::new(cfg, rng)?,
            decoder: Decoder::new(cfg, rng)?,
        })
    }

    /// Encoder output `[B, L_enc_out, d_model]`.
    pub fn encode(&self, enc_values: &Tensor, enc_stamps: &[TimeStamp], ctx: &mut ForwardCtx) -> Result<Tensor> {
        let x = self.enc_embedding.forward(enc_values, enc_stamps, 0, ctx)?;
        self.encoder.forward(&x, ctx)
    }

    /// Embedded decoder input. Its rows continue the encoder's positions, so
    /// the first token row sits at `seq_len - label_len`.
    pub fn embed_decoder(&self, dec_values: &Tensor, dec_stamps: &[TimeStamp], ctx: &mut ForwardCtx) -> Result<Tensor> {
        let offset = self.config.seq_len - self.config.label_len;
        self.dec_embedding.forward(dec_values, dec_stamps, offset, ctx)
    }

    pub fn forward_parts(
        &self,
        enc_values: &Tensor,
        enc_stamps: &[TimeStamp],
        dec_values: &Tensor,
        dec_stamps: &[TimeStamp],
        ctx: &mut ForwardCtx,
    ) -> Result<Tensor> {
        let memory = self.encode(enc_values, enc_stamps, ctx)?;
        let dec = self.embed_decoder(dec_values, dec_stamps, ctx)?;
        self.decoder.forward(&dec, &memory, ctx)
    }

    pub fn forward(&self, batch: &WindowBatch, ctx: &mut ForwardCtx) -> Result<Tensor> {
        let (dec_values, dec_stamps) = build_decoder_input(batch, &self.config)?;
        self.forward_parts(&batch.enc_tensor(), &batch.enc_stamps, &dec_values, &dec_stamps, ctx)
    }

    /// Parameters in the calendar embedding tables.
    pub fn timestamp_param_count(&self) -> usize {
        self.enc_embedding.timestamp_param_count() + self.dec_embedding.timestamp_param_count()
    }
}

impl Parameterized for Informer {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.enc_embedding.collect_params(&join(prefix, "enc_embedding"), out);
        self.dec_embedding.collect_params(&join(prefix, "dec_embedding"), out);
        self.encoder.collect_params(&join(prefix, "encoder"), out);
        self.decoder.collect_params(&join(prefix, "decoder"), out);
    }
}

#[derive(Debug, Clone)]
pub enum Network {
    Informer(Informer),
    Lstm(LstmBaseline),
}

/// A network of one of the compared variants, with its effective config.
#[derive(Debug, Clone)]
pub struct Model {
    pub variant: ModelVariant,
    pub config: ModelConfig,
    pub network: Network,
}

impl Model {
    /// Builds `variant` from `base`, initialized from `seed`.
    pub fn new(variant: ModelVariant, base: &ModelConfig, seed: u64) -> Result<Self> {
        let cfg = variant.apply(base);
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = match variant {
            ModelVariant::LstmBaseline => Network::Lstm(LstmBaseline::new(&cfg, &mut rng)),
            _ => Network::Informer(Informer::new(&cfg, &mut rng)?),
        };
        Ok(Model { variant, config: cfg, network })
    }

    /// `[B, L_y, c_out]` normalized predictions.
    pub fn forward(&self, batch: &WindowBatch, ctx: &mut ForwardCtx) -> Result<Tensor> {
        if batch.geometry != self.config.geometry() {
            return Err(Error::Alignment(format!(
                "window geometry {:?} does not match model {:?}",
                batch.geometry,
                self.config.geometry()
            )));
        }
        match &self.network {
            Network::Informer(m) => m.forward(batch, ctx),
            Network::Lstm(m) => m.forward(&batch.enc_tensor(), ctx),
        }
    }

    /// Evaluation-mode forward without graph recording; `B * L_y * c_out`
    /// values.
    pub fn predict(&self, batch: &WindowBatch, seed: u64) -> Result<Vec<f64>> {
        no_grad(|| {
            let mut ctx = ForwardCtx::eval(seed);
            Ok(self.forward(batch, &mut ctx)?.to_vec())
        })
    }

    pub fn informer(&self) -> Option<&Informer> {
        match &self.network {
            Network::Informer(m) => Some(m),
            Network::Lstm(_) => None,
        }
    }

    pub fn timestamp_param_count(&self) -> usize {
        self.informer().map_or(0, Informer::timestamp_param_count)
    }

    /// Copies of all parameter values, in `named_params` order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.named_params().iter().map(|(_, t)| t.to_vec()).collect()
    }

    pub fn restore(&self, snapshot: &[Vec<f64>]) -> Result<()> {
        let params = self.named_params();
        if params.len() != snapshot.len() {
            return Err(Error::Contract(format!("snapshot has {} tensors, model {}", snapshot.len(), params.len())));
        }
        for ((name, t), values) in params.iter().zip(snapshot) {
            if t.numel() != values.len() {
                return Err(Error::Contract(format!("snapshot size mismatch for `{name}`")));
            }
            t.data_mut().copy_from_slice(values);
        }
        Ok(())
    }
}

impl Parameterized for Model {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        match &self.network {
            Network::Informer(m) => m.collect_params(prefix, out),
            Network::Lstm(m) => m.collect_params(prefix, out),
        }
    }
}
