//! Deterministic synthetic minute-bar series for experiments and tests.
//!
//! The close follows a slow sine whose period does not divide the trading
//! day, plus a fixed-size spike during the same few minutes of every
//! session and small Gaussian noise. Only the wall-clock time stamp tells a
//! model when the spike is due: the previous day's spike lies further back
//! than an encoder window reaches.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Bar, BarInterval, RawSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikeSeriesSpec {
    pub symbol: String,
    pub interval: BarInterval,
    pub n_bars: usize,
    pub start_date: NaiveDate,
    /// Session open, `HH:MM`.
    pub session_open: String,
    pub bars_per_session: usize,
    pub base_price: f64,
    pub sine_amplitude: f64,
    /// Sine period in bars.
    pub sine_period: f64,
    /// Bars after the open at which the spike starts.
    pub spike_offset: usize,
    pub spike_width: usize,
    pub spike_height: f64,
    pub noise_std: f64,
    pub base_volume: f64,
    pub seed: u64,
}

impl Default for SpikeSeriesSpec {
    fn default() -> Self {
        SpikeSeriesSpec {
            symbol: "SYN".into(),
            interval: BarInterval::OneMinute,
            n_bars: 4000,
            start_date: NaiveDate::from_ymd_opt(2022, 1, 3).expect("valid date"),
            session_open: "09:30".into(),
            bars_per_session: 150,
            base_price: 100.0,
            sine_amplitude: 2.0,
            sine_period: 173.0,
            spike_offset: 90,
            spike_width: 6,
            spike_height: 1.5,
            noise_std: 0.02,
            base_volume: 10_000.0,
            seed: 7,
        }
    }
}

impl SpikeSeriesSpec {
    fn validate(&self) -> Result<()> {
        if self.n_bars == 0 || self.bars_per_session == 0 {
            return Err(Error::Config("n_bars and bars_per_session must be positive".into()));
        }
        if self.spike_offset + self.spike_width > self.bars_per_session {
            return Err(Error::Config("spike does not fit inside the session".into()));
        }
        let minutes = self.bars_per_session as i64 * self.interval.minutes();
        if minutes > 24 * 60 {
            return Err(Error::Config("session longer than a day".into()));
        }
        if self.base_price - self.sine_amplitude - 6.0 * self.noise_std <= 0.0 || self.sine_period <= 0.0 {
            return Err(Error::Config("synthetic prices must stay positive".into()));
        }
        Ok(())
    }

    fn open_time(&self) -> Result<NaiveTime> {
        NaiveTime::parse_from_str(&self.session_open, "%H:%M")
            .map_err(|e| Error::Config(format!("session_open `{}`: {e}", self.session_open)))
    }

    /// Whether bar `k` of a session lies inside the spike.
    pub fn in_spike(&self, k: usize) -> bool {
        (self.spike_offset..self.spike_offset + self.spike_width).contains(&k)
    }
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d += Duration::days(1);
    }
    d
}

/// Generates the series described by `spec`; identical specs give identical
/// series.
pub fn spike_series(spec: &SpikeSeriesSpec) -> Result<RawSeries> {
    spec.validate()?;
    let open = spec.open_time()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let step = spec.interval.minutes();
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut bars = Vec::with_capacity(spec.n_bars);
    let mut day = next_weekday(spec.start_date);
    let mut prev_close = spec.base_price;
    let mut t = 0usize;
    while bars.len() < spec.n_bars {
        let session_start = NaiveDateTime::new(day, open);
        for k in 0..spec.bars_per_session {
            if bars.len() == spec.n_bars {
                break;
            }
            let spike = spec.in_spike(k);
            let level = spec.base_price + spec.sine_amplitude * (two_pi * t as f64 / spec.sine_period).sin();
            let close = level + if spike { spec.spike_height } else { 0.0 } + noise.sample(&mut rng);
            let wiggle = spec.noise_std.abs() + 0.01;
            let open_px = prev_close;
            let high = open_px.max(close) + wiggle * rng.random::<f64>();
            let low = open_px.min(close) - wiggle * rng.random::<f64>();
            let volume = spec.base_volume * (if spike { 3.0 } else { 1.0 }) * rng.random_range(0.8..1.2);
            bars.push(Bar {
                datetime: session_start + Duration::minutes(k as i64 * step),
                open: open_px,
                high,
                low,
                close,
                volume,
                turnover_ratio: volume / (spec.base_volume * 1000.0),
            });
            prev_close = close;
            t += 1;
        }
        day = next_weekday(day + Duration::days(1));
    }
    RawSeries::new(spec.symbol.clone(), spec.interval, bars)
}
