use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::series::{load_csv, BarInterval, RawSeries};
use crate::error::{Error, Result};

/// One dataset file listed in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub symbol: String,
    pub bar_interval: BarInterval,
    pub path: PathBuf,
    #[serde(default)]
    pub expected_rows: Option<usize>,
}

impl DatasetEntry {
    /// `SYMBOL-interval`, e.g. `HSI-1min`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.symbol, self.bar_interval)
    }

    /// Loads the file and checks the declared row count.
    pub fn load(&self) -> Result<RawSeries> {
        let series = load_csv(&self.path, &self.symbol, self.bar_interval)?;
        if let Some(expected) = self.expected_rows {
            if expected != series.len() {
                return Err(Error::RowCount { path: self.path.clone(), expected, found: series.len() });
            }
        }
        Ok(series)
    }
}

/// TOML list of datasets:
///
/// ```toml
/// [[dataset]]
/// symbol = "HSI"
/// bar_interval = "1min"
/// path = "hsi_1min.csv"
/// expected_rows = 65358
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

impl Manifest {
    /// Parses a manifest; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(&fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for d in &mut m.datasets {
            if d.path.is_relative() {
                d.path = dir.join(&d.path);
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, toml::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Finds an entry by id (`HSI-1min`) or by bare symbol when unambiguous.
    pub fn find(&self, key: &str) -> Result<&DatasetEntry> {
        if let Some(d) = self.datasets.iter().find(|d| d.id() == key) {
            return Ok(d);
        }
        let by_symbol: Vec<_> = self.datasets.iter().filter(|d| d.symbol == key).collect();
        match by_symbol.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::Config(format!("dataset `{key}` is not in the manifest"))),
            _ => Err(Error::Config(format!("dataset `{key}` is ambiguous; use SYMBOL-interval"))),
        }
    }
}
