//! Minute-bar ingestion, calendar features, chronological split,
//! train-only z-scoring and sliding windows.

mod manifest;
mod series;
mod split;
mod time;
mod window;

pub use manifest::{DatasetEntry, Manifest};
pub use series::{
    load_csv, Bar, BarInterval, RawSeries, CLOSE, CSV_HEADER, DATETIME_FORMAT, FEATURE_NAMES, N_FEATURES, VOLUME,
};
pub use split::{split, split_sizes, NormStats, SplitSizes, SplitSpec};
pub use time::{extract_time_features, TimeStamp, WeekField};
pub use window::{base_year, make_windows, window_starts, Segment, WindowBatch, WindowGeometry, Windows};

use crate::error::Result;

/// A series split into normalized train/val/test segments.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub symbol: String,
    pub interval: BarInterval,
    pub sizes: SplitSizes,
    pub stats: NormStats,
    pub base_year: i32,
    pub train: Segment,
    pub val: Segment,
    pub test: Segment,
}

impl PreparedDataset {
    /// Splits `series` and z-scores every segment. Statistics are fitted on
    /// the training segment unless `stats` is supplied.
    pub fn new(series: &RawSeries, spec: &SplitSpec, stats: Option<NormStats>) -> Result<Self> {
        let sizes = split_sizes(series.len(), spec)?;
        let (train, val, test) = split(series.bars(), spec)?;
        let stats = match stats {
            Some(s) => s,
            None => NormStats::fit(train)?,
        };
        let year = base_year(series.bars());
        Ok(PreparedDataset {
            symbol: series.symbol.clone(),
            interval: series.interval,
            sizes,
            train: Segment::new(train, &stats, year),
            val: Segment::new(val, &stats, year),
            test: Segment::new(test, &stats, year),
            stats,
            base_year: year,
        })
    }

    pub fn id(&self) -> String {
        format!("{}-{}", self.symbol, self.interval)
    }
}
