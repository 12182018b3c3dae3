use rand::Rng;

use super::{ForwardCtx, ModelConfig};
use crate::data::{TimeStamp, WeekField};
use crate::error::{Error, Result};
use crate::nn::{dropout, join, sinusoidal_encoding, Conv1d, Embedding, Parameterized};
use crate::tensor::Tensor;

/// Five learned calendar tables summed into `d_model`: year index, month,
/// week field, hour and minute.
#[derive(Debug, Clone)]
pub struct TemporalEmbedding {
    pub year: Embedding,
    pub month: Embedding,
    pub week: Embedding,
    pub hour: Embedding,
    pub minute: Embedding,
    pub week_field: WeekField,
}

impl TemporalEmbedding {
    /// Tables start at zero, so a calendar value absent from the training
    /// data (say, a later month in the test split) adds nothing.
    pub fn new(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        TemporalEmbedding {
            year: Embedding::zeros(cfg.year_vocab, d),
            month: Embedding::zeros(12, d),
            week: Embedding::zeros(cfg.week_field.cardinality(), d),
            hour: Embedding::zeros(24, d),
            minute: Embedding::zeros(60, d),
            week_field: cfg.week_field,
        }
    }

    /// `[B, L, d_model]` for `B * L` stamps.
    pub fn forward(&self, stamps: &[TimeStamp], b: usize, l: usize) -> Result<Tensor> {
        let shape = [b, l];
        let years = self.year.vocab();
        let idx = |f: &dyn Fn(&TimeStamp) -> usize| stamps.iter().map(f).collect::<Vec<usize>>();
        let y = self.year.forward(&idx(&|s| (s.year_index as usize).min(years - 1)), &shape)?;
        let m = self.month.forward(&idx(&|s| s.month as usize - 1), &shape)?;
        let w = self.week.forward(&idx(&|s| self.week_field.index(s)), &shape)?;
        let h = self.hour.forward(&idx(&|s| s.hour as usize), &shape)?;
        let n = self.minute.forward(&idx(&|s| s.minute as usize), &shape)?;
        y.add(&m)?.add(&w)?.add(&h)?.add(&n)
    }
}

impl Parameterized for TemporalEmbedding {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.year.collect_params(&join(prefix, "year"), out);
        self.month.collect_params(&join(prefix, "month"), out);
        self.week.collect_params(&join(prefix, "week"), out);
        self.hour.collect_params(&join(prefix, "hour"), out);
        self.minute.collect_params(&join(prefix, "minute"), out);
    }
}

/// Value convolution + sinusoidal position + optional calendar embedding.
#[derive(Debug, Clone)]
pub struct DataEmbedding {
    pub value: Conv1d,
    pub temporal: Option<TemporalEmbedding>,
    pub d_model: usize,
    pub dropout: f64,
}

impl DataEmbedding {
    pub fn new(c_in: usize, cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        DataEmbedding {
            value: Conv1d::new(c_in, cfg.d_model, 3, false, rng),
            temporal: cfg.timestamp_enabled.then(|| TemporalEmbedding::new(cfg)),
            d_model: cfg.d_model,
            dropout: cfg.dropout,
        }
    }

    /// Embeds `values` `[B, L, c_in]` whose rows sit at positions
    /// `offset..offset + L`. `stamps` holds `B * L` entries.
    pub fn forward(&self, values: &Tensor, stamps: &[TimeStamp], offset: usize, ctx: &mut ForwardCtx) -> Result<Tensor> {
        if values.rank() != 3 {
            return Err(Error::dim("embed", values.shape(), &[0, 0, self.value.c_in()]));
        }
        let (b, l) = (values.shape()[0], values.shape()[1]);
        if stamps.len() != b * l {
            return Err(Error::Alignment(format!("{} time stamps for {b} x {l} value rows", stamps.len())));
        }
        let mut x = self.value.forward(values)?.add(&sinusoidal_encoding(offset, l, self.d_model))?;
        if let Some(t) = &self.temporal {
            x = x.add(&t.forward(stamps, b, l)?)?;
        }
        dropout(&x, self.dropout, ctx.training, &mut ctx.rng)
    }

    pub fn timestamp_param_count(&self) -> usize {
        self.temporal.as_ref().map_or(0, |t| t.param_count())
    }
}

impl Parameterized for DataEmbedding {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.value.collect_params(&join(prefix, "value"), out);
        if let Some(t) = &self.temporal {
            t.collect_params(&join(prefix, "temporal"), out);
        }
    }
}
