use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{mae, mape, rmse};
use super::report::{MetricsReport, MetricsRow, Scale};
use crate::data::{make_windows, NormStats, Segment, WindowBatch, WindowGeometry, Windows, CLOSE, DATETIME_FORMAT};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::train::write_atomic;

const EVAL_BATCH: usize = 64;

/// Anything producing close forecasts for a window batch.
pub trait Forecaster {
    /// Normalized predictions, `B * pred_len`.
    fn forecast(&self, batch: &WindowBatch) -> Result<Vec<f64>>;

    /// Predictions in price units.
    fn forecast_raw(&self, batch: &WindowBatch, stats: &NormStats) -> Result<Vec<f64>> {
        Ok(stats.denormalize(&self.forecast(batch)?, CLOSE))
    }
}

impl Forecaster for Model {
    fn forecast(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        self.predict(batch, 0)
    }
}

/// Repeats the last observed close over the whole horizon.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl Forecaster for Persistence {
    fn forecast(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        let ly = batch.geometry.pred_len;
        Ok(batch.last_close.iter().flat_map(|&c| std::iter::repeat_n(c, ly)).collect())
    }

    fn forecast_raw(&self, batch: &WindowBatch, _stats: &NormStats) -> Result<Vec<f64>> {
        let ly = batch.geometry.pred_len;
        Ok(batch.last_close_raw.iter().flat_map(|&c| std::iter::repeat_n(c, ly)).collect())
    }
}

/// Returns the ground truth; a perfect forecaster.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl Forecaster for Oracle {
    fn forecast(&self, batch: &WindowBatch) -> Result<Vec<f64>> {
        Ok(batch.target.clone())
    }

    fn forecast_raw(&self, batch: &WindowBatch, _stats: &NormStats) -> Result<Vec<f64>> {
        Ok(batch.target_raw.clone())
    }
}

/// Identifies the rows an evaluation produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalLabel {
    pub dataset: String,
    pub interval: String,
    pub variant: String,
}

/// One-shot forecasts for every window, aggregated over all (window,
/// horizon) pairs on both scales. Returns the normalized row then the raw
/// row.
pub fn evaluate(
    forecaster: &dyn Forecaster,
    windows: &Windows<'_>,
    stats: &NormStats,
    label: &EvalLabel,
) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::Contract("no test windows to evaluate".into()));
    }
    let (mut pn, mut tn, mut pr, mut tr) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for batch in windows.batches(EVAL_BATCH) {
        let batch = batch?;
        pn.extend(forecaster.forecast(&batch)?);
        pr.extend(forecaster.forecast_raw(&batch, stats)?);
        tn.extend_from_slice(&batch.target);
        tr.extend_from_slice(&batch.target_raw);
    }
    let row = |scale, p: &[f64], t: &[f64]| -> Result<MetricsRow> {
        Ok(MetricsRow {
            dataset: label.dataset.clone(),
            interval: label.interval.clone(),
            variant: label.variant.clone(),
            scale,
            mae: mae(p, t)?,
            rmse: rmse(p, t)?,
            mape: mape(p, t)?,
            n: p.len(),
        })
    };
    Ok(MetricsReport { rows: vec![row(Scale::Normalized, &pn, &tn)?, row(Scale::Raw, &pr, &tr)?] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplayRow {
    pub timestamp: chrono::NaiveDateTime,
    pub truth: f64,
    /// One per variant, in `DisplaySample::variants` order.
    pub predictions: Vec<f64>,
    pub volume: f64,
}

/// Contiguous one-step-ahead forecasts in price units, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplaySample {
    pub variants: Vec<String>,
    /// First window index of the sample.
    pub origin: usize,
    pub rows: Vec<DisplayRow>,
}

pub const DISPLAY_LEN: usize = 250;

impl DisplaySample {
    /// Picks `len` consecutive forecast targets (or all of them, if fewer)
    /// starting at a seeded uniform origin. Row `i` is the first-horizon
    /// forecast of window `origin + i`.
    pub fn build(
        segment: &Segment,
        geometry: &WindowGeometry,
        forecasters: &[(String, &dyn Forecaster)],
        stats: &NormStats,
        len: usize,
        seed: u64,
    ) -> Result<Self> {
        let all = make_windows(segment, geometry, 1)?;
        let take = len.min(all.len());
        let origin = ChaCha8Rng::seed_from_u64(seed).random_range(0..=all.len() - take);
        let starts = &all.starts[origin..origin + take];
        let ly = geometry.pred_len;
        let mut rows: Vec<DisplayRow> = starts
            .iter()
            .map(|&s| {
                let t = s + geometry.seq_len;
                DisplayRow {
                    timestamp: segment.datetimes[t],
                    truth: segment.raw_close[t],
                    predictions: Vec::with_capacity(forecasters.len()),
                    volume: segment.raw_volume[t],
                }
            })
            .collect();
        for (_, f) in forecasters {
            let mut k = 0;
            for chunk in starts.chunks(EVAL_BATCH) {
                let batch = all.batch(chunk)?;
                let raw = f.forecast_raw(&batch, stats)?;
                for i in 0..chunk.len() {
                    rows[k].predictions.push(raw[i * ly]);
                    k += 1;
                }
            }
        }
        Ok(DisplaySample { variants: forecasters.iter().map(|(n, _)| n.clone()).collect(), origin, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `timestamp,truth,<variant>...,volume`
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string(), "truth".to_string()];
        header.extend(self.variants.iter().cloned());
        header.push("volume".into());
        w.write_record(&header).map_err(|e| Error::Serde(e.to_string()))?;
        for r in &self.rows {
            let mut rec = vec![r.timestamp.format(DATETIME_FORMAT).to_string(), r.truth.to_string()];
            rec.extend(r.predictions.iter().map(f64::to_string));
            rec.push(r.volume.to_string());
            w.write_record(&rec).map_err(|e| Error::Serde(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }
}
