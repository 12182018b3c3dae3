use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["datetime", "open", "high", "low", "close", "volume", "turnover_ratio"];
pub const DATETIME_FORMAT: &str = "%Y-%m-%d %H:%M";

/// Model input features, in column order.
pub const FEATURE_NAMES: [&str; 6] = ["open", "high", "low", "close", "volume", "turnover_ratio"];
pub const N_FEATURES: usize = FEATURE_NAMES.len();
/// Index of the close price, the prediction target.
pub const CLOSE: usize = 3;
pub const VOLUME: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BarInterval {
    #[serde(rename = "1min")]
    OneMinute,
    #[serde(rename = "5min")]
    FiveMinute,
}

impl BarInterval {
    pub fn minutes(self) -> i64 {
        match self {
            BarInterval::OneMinute => 1,
            BarInterval::FiveMinute => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BarInterval::OneMinute => "1-minute",
            BarInterval::FiveMinute => "5-minute",
        }
    }
}

impl fmt::Display for BarInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BarInterval::OneMinute => "1min",
            BarInterval::FiveMinute => "5min",
        })
    }
}

impl FromStr for BarInterval {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1min" => Ok(BarInterval::OneMinute),
            "5min" => Ok(BarInterval::FiveMinute),
            other => Err(Error::Config(format!("unknown bar interval `{other}` (use 1min or 5min)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub datetime: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub turnover_ratio: f64,
}

impl Bar {
    pub fn features(&self) -> [f64; N_FEATURES] {
        [self.open, self.high, self.low, self.close, self.volume, self.turnover_ratio]
    }

    fn check(&self) -> std::result::Result<(), String> {
        for (name, v) in [("open", self.open), ("high", self.high), ("low", self.low), ("close", self.close)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be a positive price, got {v}"));
            }
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(format!("volume must be non-negative, got {}", self.volume));
        }
        if !(self.turnover_ratio.is_finite() && self.turnover_ratio >= 0.0) {
            return Err(format!("turnover_ratio must be non-negative, got {}", self.turnover_ratio));
        }
        Ok(())
    }
}

/// A validated bar series: strictly increasing timestamps, positive prices,
/// non-negative volume.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub symbol: String,
    pub interval: BarInterval,
    bars: Vec<Bar>,
}

impl RawSeries {
    pub fn new(symbol: impl Into<String>, interval: BarInterval, bars: Vec<Bar>) -> Result<Self> {
        let path = Path::new("<memory>");
        for (i, bar) in bars.iter().enumerate() {
            bar.check().map_err(|message| Error::Parse { path: path.into(), line: i + 1, message })?;
            if i > 0 && bar.datetime <= bars[i - 1].datetime {
                return Err(Error::Ordering {
                    path: path.into(),
                    line: i + 1,
                    previous: bars[i - 1].datetime.format(DATETIME_FORMAT).to_string(),
                    found: bar.datetime.format(DATETIME_FORMAT).to_string(),
                });
            }
        }
        Ok(RawSeries { symbol: symbol.into(), interval, bars })
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn id(&self) -> String {
        format!("{}-{}", self.symbol, self.interval)
    }

    /// Writes the series in the canonical CSV layout.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.bars.len() * 64);
        out.push_str(&CSV_HEADER.join(","));
        out.push('\n');
        for b in &self.bars {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.datetime.format(DATETIME_FORMAT),
                b.open,
                b.high,
                b.low,
                b.close,
                b.volume,
                b.turnover_ratio
            ));
        }
        File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Reads a bar CSV with header
/// `datetime,open,high,low,close,volume,turnover_ratio`. Rows must already
/// be in strictly increasing time order; nothing is re-sorted.
pub fn load_csv(path: &Path, symbol: &str, interval: BarInterval) -> Result<RawSeries> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, path, symbol, interval)
}

pub(crate) fn parse_csv(text: &str, path: &Path, symbol: &str, interval: BarInterval) -> Result<RawSeries> {
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(parse_err(1, format!("expected header `{}`", CSV_HEADER.join(","))));
    }

    let mut bars: Vec<Bar> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", CSV_HEADER.len(), record.len())));
        }
        let datetime = NaiveDateTime::parse_from_str(&record[0], DATETIME_FORMAT)
            .map_err(|e| parse_err(line, format!("bad datetime `{}`: {e}", &record[0])))?;
        let mut nums = [0.0; 6];
        for (k, slot) in nums.iter_mut().enumerate() {
            let field = &record[k + 1];
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("{} is not a number: `{field}`", CSV_HEADER[k + 1])))?;
        }
        let bar = Bar {
            datetime,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
            turnover_ratio: nums[5],
        };
        bar.check().map_err(|m| parse_err(line, m))?;
        if let Some(prev) = bars.last() {
            if bar.datetime <= prev.datetime {
                return Err(Error::Ordering {
                    path: path.to_path_buf(),
                    line,
                    previous: prev.datetime.format(DATETIME_FORMAT).to_string(),
                    found: bar.datetime.format(DATETIME_FORMAT).to_string(),
                });
            }
        }
        bars.push(bar);
    }
    Ok(RawSeries { symbol: symbol.to_string(), interval, bars })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "datetime,open,high,low,close,volume,turnover_ratio\n";

    fn parse(body: &str) -> Result<RawSeries> {
        parse_csv(&format!("{HEADER}{body}"), Path::new("t.csv"), "T", BarInterval::OneMinute)
    }

    #[test]
    fn three_rows() {
        let s = parse(
            "2022-01-03 09:30,10,11,9,10.5,1000,0.01\n\
             2022-01-03 09:31,10.5,11,10,10.8,900,0.02\n\
             2022-01-03 09:32,10.8,11.2,10.7,11,1200,0.015\n",
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.bars()[2].close, 11.0);
    }

    #[test]
    fn non_positive_close_names_row() {
        let err = parse(
            "2022-01-03 09:30,10,11,9,10.5,1000,0.01\n\
             2022-01-03 09:31,10.5,11,10,0,900,0.02\n",
        )
        .unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("close"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn shuffled_rows_are_an_ordering_error() {
        let err = parse(
            "2022-01-03 09:31,10,11,9,10.5,1000,0.01\n\
             2022-01-03 09:30,10.5,11,10,10.8,900,0.02\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Ordering { line: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let err = parse(
            "2022-01-03 09:30,10,11,9,10.5,1000,0.01\n\
             2022-01-03 09:30,10.5,11,10,10.8,900,0.02\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Ordering { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("2022-01-03 09:30,10,abc,9,10.5,1000,0.01\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("2022-01-03 09:30,10,11\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("03/01/2022 09:30,10,11,9,10.5,1000,0.01\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn wrong_header() {
        let err = parse_csv("time,o,h,l,c,v,t\n", Path::new("t.csv"), "T", BarInterval::OneMinute).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
