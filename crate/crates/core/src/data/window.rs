use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::series::{Bar, CLOSE, N_FEATURES};
use super::split::NormStats;
use super::time::{extract_time_features, TimeStamp};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Encoder input length, guiding-token length and forecast horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub seq_len: usize,
    pub label_len: usize,
    pub pred_len: usize,
}

impl Default for WindowGeometry {
    fn default() -> Self {
        WindowGeometry { seq_len: 96, label_len: 48, pred_len: 24 }
    }
}

impl WindowGeometry {
    /// Rows consumed by one window: encoder span plus horizon.
    pub fn span(&self) -> usize {
        self.seq_len + self.pred_len
    }

    pub fn decoder_len(&self) -> usize {
        self.label_len + self.pred_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.label_len == 0 || self.pred_len == 0 {
            return Err(Error::Config(format!("window lengths must be positive: {self:?}")));
        }
        if self.label_len > self.seq_len {
            return Err(Error::Config(format!(
                "label_len {} exceeds seq_len {}",
                self.label_len, self.seq_len
            )));
        }
        Ok(())
    }
}

/// One normalized split segment with its calendar features.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Row-major `[len, N_FEATURES]` z-scores.
    pub values: Vec<f64>,
    pub stamps: Vec<TimeStamp>,
    pub datetimes: Vec<NaiveDateTime>,
    pub raw_close: Vec<f64>,
    pub raw_volume: Vec<f64>,
}

impl Segment {
    pub fn new(bars: &[Bar], stats: &NormStats, base_year: i32) -> Self {
        Segment {
            values: stats.normalize(bars),
            stamps: bars.iter().map(|b| extract_time_features(&b.datetime, base_year)).collect(),
            datetimes: bars.iter().map(|b| b.datetime).collect(),
            raw_close: bars.iter().map(|b| b.close).collect(),
            raw_volume: bars.iter().map(|b| b.volume).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn close(&self, row: usize) -> f64 {
        self.values[row * N_FEATURES + CLOSE]
    }

    fn rows(&self, start: usize, len: usize) -> &[f64] {
        &self.values[start * N_FEATURES..(start + len) * N_FEATURES]
    }
}

/// Earliest calendar year of a bar series, the `year_index` anchor.
pub fn base_year(bars: &[Bar]) -> i32 {
    bars.first().map_or(1970, |b| b.datetime.year())
}

/// Window start offsets `0, stride, 2 stride, ...` with room for a full span.
pub fn window_starts(len: usize, geom: &WindowGeometry, stride: usize) -> Result<Vec<usize>> {
    geom.validate()?;
    if stride == 0 {
        return Err(Error::Config("window stride must be positive".into()));
    }
    if len < geom.span() {
        return Err(Error::Capacity { needed: geom.span(), available: len });
    }
    Ok((0..=len - geom.span()).step_by(stride).collect())
}

/// Aligned slices for a batch of windows.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    pub geometry: WindowGeometry,
    pub starts: Vec<usize>,
    /// `[B, seq_len, N_FEATURES]`
    pub enc_values: Vec<f64>,
    /// `B * seq_len`
    pub enc_stamps: Vec<TimeStamp>,
    /// `[B, label_len, N_FEATURES]`, the trailing encoder rows.
    pub token_values: Vec<f64>,
    /// `B * pred_len`
    pub future_stamps: Vec<TimeStamp>,
    /// Normalized close after the encoder span, `[B, pred_len]`.
    pub target: Vec<f64>,
    pub target_raw: Vec<f64>,
    /// Last encoder close per window, normalized and raw.
    pub last_close: Vec<f64>,
    pub last_close_raw: Vec<f64>,
    /// Datetime of every target row, `B * pred_len`.
    pub target_times: Vec<NaiveDateTime>,
}

impl WindowBatch {
    pub fn collate(segment: &Segment, starts: &[usize], geom: &WindowGeometry) -> Result<Self> {
        geom.validate()?;
        let b = starts.len();
        if b == 0 {
            return Err(Error::Contract("empty window batch".into()));
        }
        let (lx, lt, ly) = (geom.seq_len, geom.label_len, geom.pred_len);
        let mut out = WindowBatch {
            geometry: *geom,
            starts: starts.to_vec(),
            enc_values: Vec::with_capacity(b * lx * N_FEATURES),
            enc_stamps: Vec::with_capacity(b * lx),
            token_values: Vec::with_capacity(b * lt * N_FEATURES),
            future_stamps: Vec::with_capacity(b * ly),
            target: Vec::with_capacity(b * ly),
            target_raw: Vec::with_capacity(b * ly),
            last_close: Vec::with_capacity(b),
            last_close_raw: Vec::with_capacity(b),
            target_times: Vec::with_capacity(b * ly),
        };
        for &s in starts {
            if s + geom.span() > segment.len() {
                return Err(Error::Capacity { needed: s + geom.span(), available: segment.len() });
            }
            let f = s + lx;
            out.enc_values.extend_from_slice(segment.rows(s, lx));
            out.enc_stamps.extend_from_slice(&segment.stamps[s..f]);
            out.token_values.extend_from_slice(segment.rows(f - lt, lt));
            out.future_stamps.extend_from_slice(&segment.stamps[f..f + ly]);
            out.target.extend((f..f + ly).map(|r| segment.close(r)));
            out.target_raw.extend_from_slice(&segment.raw_close[f..f + ly]);
            out.target_times.extend_from_slice(&segment.datetimes[f..f + ly]);
            out.last_close.push(segment.close(f - 1));
            out.last_close_raw.push(segment.raw_close[f - 1]);
        }
        Ok(out)
    }

    pub fn batch_size(&self) -> usize {
        self.starts.len()
    }

    pub fn enc_tensor(&self) -> Tensor {
        let g = &self.geometry;
        Tensor::from_vec(self.enc_values.clone(), &[self.batch_size(), g.seq_len, N_FEATURES])
            .expect("collated sizes")
    }

    /// `[B, pred_len, 1]`
    pub fn target_tensor(&self) -> Tensor {
        Tensor::from_vec(self.target.clone(), &[self.batch_size(), self.geometry.pred_len, 1]).expect("collated sizes")
    }

    /// Stamps of the guiding-token rows: the trailing `label_len` encoder stamps.
    pub fn token_stamps(&self) -> Vec<TimeStamp> {
        let g = &self.geometry;
        self.enc_stamps
            .chunks_exact(g.seq_len)
            .flat_map(|w| w[g.seq_len - g.label_len..].iter().copied())
            .collect()
    }
}

/// Sliding windows over a segment.
#[derive(Debug, Clone)]
pub struct Windows<'a> {
    pub segment: &'a Segment,
    pub geometry: WindowGeometry,
    pub starts: Vec<usize>,
}

impl<'a> Windows<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn batch(&self, starts: &[usize]) -> Result<WindowBatch> {
        WindowBatch::collate(self.segment, starts, &self.geometry)
    }

    /// Consecutive batches of at most `batch_size` windows, in order.
    pub fn batches(&self, batch_size: usize) -> impl Iterator<Item = Result<WindowBatch>> + '_ {
        self.starts.chunks(batch_size.max(1)).map(move |c| self.batch(c))
    }

    /// One single-window batch per start.
    pub fn iter(&self) -> impl Iterator<Item = Result<WindowBatch>> + '_ {
        self.batches(1)
    }
}

/// Window count is `len - span + 1` at stride 1.
pub fn make_windows<'a>(segment: &'a Segment, geom: &WindowGeometry, stride: usize) -> Result<Windows<'a>> {
    let starts = window_starts(segment.len(), geom, stride)?;
    Ok(Windows { segment, geometry: *geom, starts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn segment(n: usize) -> Segment {
        let t0 = NaiveDate::from_ymd_opt(2022, 1, 3).unwrap().and_hms_opt(9, 30, 0).unwrap();
        let bars: Vec<Bar> = (0..n)
            .map(|i| {
                let x = i as f64;
                Bar {
                    datetime: t0 + chrono::Duration::minutes(i as i64),
                    open: 10.0 + x.sin(),
                    high: 11.0 + x.sin(),
                    low: 9.0 + x.cos(),
                    close: 10.0 + 0.01 * x,
                    volume: 1000.0 + 10.0 * x,
                    turnover_ratio: 0.01 + 0.001 * (x % 7.0),
                }
            })
            .collect();
        let stats = NormStats::fit(&bars).unwrap();
        Segment::new(&bars, &stats, 2022)
    }

    #[test]
    fn window_counts() {
        let g = WindowGeometry::default();
        assert_eq!(make_windows(&segment(120), &g, 1).unwrap().len(), 1);
        assert_eq!(make_windows(&segment(130), &g, 1).unwrap().len(), 11);
        assert_eq!(make_windows(&segment(130), &g, 4).unwrap().len(), 3);
        assert!(matches!(
            make_windows(&segment(119), &g, 1).unwrap_err(),
            Error::Capacity { needed: 120, available: 119 }
        ));
    }

    #[test]
    fn token_and_target_alignment() {
        let seg = segment(140);
        let g = WindowGeometry::default();
        let w = make_windows(&seg, &g, 7).unwrap();
        let batch = w.batch(&w.starts).unwrap();
        for (i, &s) in batch.starts.iter().enumerate() {
            let enc = &batch.enc_values[i * 96 * N_FEATURES..(i + 1) * 96 * N_FEATURES];
            let tok = &batch.token_values[i * 48 * N_FEATURES..(i + 1) * 48 * N_FEATURES];
            assert_eq!(tok, &enc[48 * N_FEATURES..]);
            for h in 0..24 {
                assert_eq!(batch.target[i * 24 + h], seg.close(s + 96 + h));
                assert_eq!(batch.future_stamps[i * 24 + h], seg.stamps[s + 96 + h]);
            }
        }
        assert_eq!(batch.token_stamps().len(), batch.batch_size() * 48);
        assert_eq!(batch.target_tensor().shape(), &[batch.batch_size(), 24, 1]);
    }
}
