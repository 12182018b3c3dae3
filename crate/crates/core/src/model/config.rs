use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionKind, SparsityMode};
use crate::data::{WeekField, WindowGeometry, N_FEATURES};
use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub e_layers: usize,
    pub d_layers: usize,
    pub d_ff: usize,
    pub seq_len: usize,
    pub label_len: usize,
    pub pred_len: usize,
    pub enc_in: usize,
    pub dec_in: usize,
    pub c_out: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub attention: AttentionKind,
    /// Conv/ELU/max-pool halving between encoder layers.
    pub distil: bool,
    /// Learned calendar embeddings; off for Informer†.
    pub timestamp_enabled: bool,
    /// `c` in `u = ceil(c ln L)`.
    pub factor: f64,
    pub sparsity_mode: SparsityMode,
    pub week_field: WeekField,
    /// Rows of the year table; later years share the last row.
    pub year_vocab: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            e_layers: 3,
            d_layers: 2,
            d_ff: 128,
            seq_len: 96,
            label_len: 48,
            pred_len: 24,
            enc_in: N_FEATURES,
            dec_in: N_FEATURES,
            c_out: 1,
            dropout: 0.05,
            activation: Activation::Gelu,
            attention: AttentionKind::ProbSparse,
            distil: true,
            timestamp_enabled: true,
            factor: 5.0,
            sparsity_mode: SparsityMode::Exact,
            week_field: WeekField::DayOfWeek,
            year_vocab: 16,
        }
    }
}

impl ModelConfig {
    /// Smallest configuration used by gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            e_layers: 1,
            d_layers: 1,
            d_ff: 16,
            seq_len: 16,
            label_len: 8,
            pred_len: 4,
            ..ModelConfig::default()
        }
    }

    pub fn geometry(&self) -> WindowGeometry {
        WindowGeometry { seq_len: self.seq_len, label_len: self.label_len, pred_len: self.pred_len }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().validate()?;
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.enc_in != self.dec_in {
            return fail(format!("enc_in {} differs from dec_in {}", self.enc_in, self.dec_in));
        }
        if self.enc_in == 0 || self.c_out == 0 || self.d_ff == 0 {
            return fail("enc_in, c_out and d_ff must be positive".into());
        }
        if self.e_layers == 0 || self.d_layers == 0 {
            return fail("encoder and decoder need at least one layer".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.factor.is_finite() && self.factor > 0.0) {
            return fail(format!("factor {} must be positive", self.factor));
        }
        if self.year_vocab == 0 {
            return fail("year_vocab must be positive".into());
        }
        Ok(())
    }

    /// Encoder lengths entering each layer.
    pub fn encoder_lengths(&self) -> Vec<usize> {
        let mut lens = vec![self.seq_len];
        for _ in 1..self.e_layers {
            let l = *lens.last().unwrap();
            lens.push(if self.distil { l.div_ceil(2) } else { l });
        }
        lens
    }
}

/// Networks compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Informer,
    /// Informer without calendar embeddings.
    InformerDagger,
    /// Full attention, no distilling, same generative decoder.
    TransformerFull,
    LstmBaseline,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Informer,
        ModelVariant::InformerDagger,
        ModelVariant::TransformerFull,
        ModelVariant::LstmBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Informer => "informer",
            ModelVariant::InformerDagger => "informer_dagger",
            ModelVariant::TransformerFull => "transformer_full",
            ModelVariant::LstmBaseline => "lstm_baseline",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelVariant::Informer => "Informer",
            ModelVariant::InformerDagger => "Informer†",
            ModelVariant::TransformerFull => "Transformer",
            ModelVariant::LstmBaseline => "LSTM",
        }
    }

    /// The configuration this variant actually runs with.
    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        match self {
            ModelVariant::Informer | ModelVariant::LstmBaseline => {}
            ModelVariant::InformerDagger => cfg.timestamp_enabled = false,
            ModelVariant::TransformerFull => {
                cfg.attention = AttentionKind::Full;
                cfg.distil = false;
            }
        }
        cfg
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "informer" => Ok(ModelVariant::Informer),
            "informer_dagger" | "informer†" => Ok(ModelVariant::InformerDagger),
            "transformer_full" | "transformer" => Ok(ModelVariant::TransformerFull),
            "lstm_baseline" | "lstm" => Ok(ModelVariant::LstmBaseline),
            _ => Err(Error::Config(format!("unknown model variant `{s}`"))),
        }
    }
}
