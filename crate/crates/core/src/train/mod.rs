//! MSE training with Adam, per-epoch learning-rate decay, early stopping
//! on validation loss and versioned checkpoints.

mod adam;
mod checkpoint;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest,
    ParamEntry, Provenance, FORMAT_VERSION, MAGIC,
};
pub(crate) use checkpoint::write_atomic;

use crate::data::{make_windows, Segment, Windows};
use crate::error::{Error, Result};
use crate::model::{ForwardCtx, Model};
use crate::nn::Parameterized;
use crate::tensor::{no_grad, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub patience: usize,
    pub seed: u64,
    /// Offset between consecutive training windows.
    pub train_stride: usize,
    /// Offset between consecutive validation windows.
    pub val_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 20,
            base_lr: 4e-5,
            lr_decay: 0.5,
            patience: 3,
            seed: 2022,
            train_stride: 1,
            val_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return fail("base_lr must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("lr_decay must lie in (0, 1]");
        }
        if self.train_stride == 0 || self.val_stride == 0 {
            return fail("window strides must be positive");
        }
        Ok(())
    }
}

/// `base_lr * decay^(epoch - 1)` for 1-based `epoch`.
pub fn lr_schedule(epoch: usize, base_lr: f64, decay: f64) -> f64 {
    base_lr * decay.powi(epoch.saturating_sub(1) as i32)
}

/// Mean squared error over every element.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("mse_loss", pred.shape(), target.shape()));
    }
    Ok(pred.sub(target)?.square().mean_all())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EarlyStopped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    /// Not serialized and ignored by equality.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.val_loss.to_bits() == other.val_loss.to_bits()
            && self.lr.to_bits() == other.lr.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    pub fn wall_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.wall_seconds).sum()
    }

    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.train_loss)
    }
}

/// Mean loss over all windows, evaluation mode, no graph.
pub fn evaluate_loss(model: &Model, windows: &Windows<'_>, batch_size: usize, seed: u64) -> Result<f64> {
    no_grad(|| {
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in windows.batches(batch_size) {
            let batch = batch?;
            let mut ctx = ForwardCtx::eval(seed);
            let pred = model.forward(&batch, &mut ctx)?;
            let loss = mse_loss(&pred, &batch.target_tensor())?.item();
            total += loss * batch.batch_size() as f64;
            count += batch.batch_size();
        }
        Ok(total / count as f64)
    })
}

/// Trains `model` in place and leaves it holding the best-validation
/// parameters. `on_epoch` sees each record as it is produced.
pub fn fit(
    model: &Model,
    train: &Segment,
    val: &Segment,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    cfg.validate()?;
    let geom = model.config.geometry();
    let train_w = make_windows(train, &geom, cfg.train_stride)?;
    let val_w = make_windows(val, &geom, cfg.val_stride)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.named_params().into_iter().map(|(_, t)| t).collect());
    let mut order = train_w.starts.clone();
    let mut records = Vec::new();
    let mut best: Option<(usize, f64, Vec<Vec<f64>>)> = None;
    let mut stale = 0;
    let mut stop_reason = StopReason::Completed;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_decay);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_w.batch(chunk)?;
            adam.zero_grad();
            let mut ctx = ForwardCtx::train(rng.random());
            let pred = model.forward(&batch, &mut ctx)?;
            let loss = mse_loss(&pred, &batch.target_tensor())?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi, loss: value });
            }
            loss.backward()?;
            adam.step(lr);
            total += value * chunk.len() as f64;
        }
        let train_loss = total / order.len() as f64;
        let val_loss = evaluate_loss(model, &val_w, cfg.batch_size, cfg.seed)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: 0, loss: val_loss });
        }
        let record = EpochRecord { epoch, train_loss, val_loss, lr, wall_seconds: started.elapsed().as_secs_f64() };
        on_epoch(&record);
        records.push(record);

        if best.as_ref().is_none_or(|(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, model.snapshot()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    let (best_epoch, best_val_loss, snapshot) = best.expect("at least one epoch ran");
    model.restore(&snapshot)?;
    Ok(TrainHistory { epochs: records, stop_reason, best_epoch, best_val_loss })
}
