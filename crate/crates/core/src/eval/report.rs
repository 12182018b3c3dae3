use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::write_atomic;

/// Column order of the delimited report.
pub const REPORT_HEADER: [&str; 8] = ["Dataset", "Time scale", "Networks", "MAE", "RMSE", "MAPE", "Scale", "N"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Z-scored with the training statistics.
    Normalized,
    /// Original price units.
    Raw,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Normalized => "normalized",
            Scale::Raw => "raw",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Scale::Normalized),
            "raw" => Ok(Scale::Raw),
            other => Err(Error::Config(format!("unknown scale `{other}` (use normalized or raw)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRow {
    pub dataset: String,
    pub interval: String,
    pub variant: String,
    pub scale: Scale,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    /// Predicted points aggregated.
    pub n: usize,
}

impl MetricsRow {
    fn check(&self) -> Result<()> {
        let ok = self.mae >= 0.0 && self.mape >= 0.0 && self.rmse >= self.mae * (1.0 - 1e-12);
        if !ok || !(self.mae.is_finite() && self.rmse.is_finite() && self.mape.is_finite()) {
            return Err(Error::Contract(format!(
                "metrics for {}/{}/{} violate RMSE >= MAE >= 0: mae {}, rmse {}, mape {}",
                self.dataset, self.interval, self.variant, self.mae, self.rmse, self.mape
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// `.csv` selects the delimited table, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
    }

    pub fn filter_scale(&self, scale: Scale) -> MetricsReport {
        MetricsReport { rows: self.rows.iter().filter(|r| r.scale == scale).cloned().collect() }
    }

    pub fn find(&self, dataset: &str, variant: &str, scale: Scale) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.variant == variant && r.scale == scale)
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Completeness("report has no rows".into()));
        }
        self.rows.iter().try_for_each(MetricsRow::check)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).map_err(|e| Error::Serde(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.interval.clone(),
                r.variant.clone(),
                r.mae.to_string(),
                r.rmse.to_string(),
                r.mape.to_string(),
                r.scale.to_string(),
                r.n.to_string(),
            ])
            .map_err(|e| Error::Serde(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| Error::Serde(e.to_string()))?;
        if header.iter().ne(REPORT_HEADER.iter().copied()) {
            return Err(Error::Serde(format!("report header must be `{}`", REPORT_HEADER.join(","))));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Serde(format!("`{s}`: {e}")));
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Serde(e.to_string()))?;
            rows.push(MetricsRow {
                dataset: rec[0].to_string(),
                interval: rec[1].to_string(),
                variant: rec[2].to_string(),
                mae: num(&rec[3])?,
                rmse: num(&rec[4])?,
                mape: num(&rec[5])?,
                scale: rec[6].parse()?,
                n: rec[7].parse().map_err(|e| Error::Serde(format!("N: {e}")))?,
            });
        }
        let r = MetricsReport { rows };
        r.validate()?;
        Ok(r)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    /// Writes atomically; validation runs first, so an invalid or empty
    /// report never produces a file.
    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let text = self.render(format)?;
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path, format: ReportFormat) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match format {
            ReportFormat::Json => Self::from_json(&text),
            ReportFormat::Csv => Self::from_csv(&text),
        }
    }

    /// Markdown-style table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::from("| Dataset | Time scale | Networks | MAE | RMSE | MAPE | Scale | N |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {} | {} |\n",
                r.dataset, r.interval, r.variant, r.mae, r.rmse, r.mape, r.scale, r.n
            ));
        }
        out
    }
}
