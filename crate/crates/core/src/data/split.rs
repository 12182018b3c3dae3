use serde::{Deserialize, Serialize};

use super::series::{Bar, N_FEATURES};
use crate::error::{Error, Result};

/// Chronological train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config(format!("split fractions must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Round half up, tolerant of products like `0.7 * 5 = 3.4999999999999996`.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9 * x.abs().max(1.0)).floor() as usize
}

/// Train and validation sizes are `round(f * n)`; test takes the remainder.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> Result<SplitSizes> {
    spec.validate()?;
    let train = round_half_up(spec.train * n as f64);
    let val = round_half_up(spec.val * n as f64);
    if train == 0 || val == 0 || train + val >= n {
        return Err(Error::Capacity { needed: 3, available: n });
    }
    Ok(SplitSizes { train, val, test: n - train - val })
}

/// Contiguous chronological split of a bar slice.
pub fn split<'a>(bars: &'a [Bar], spec: &SplitSpec) -> Result<(&'a [Bar], &'a [Bar], &'a [Bar])> {
    let s = split_sizes(bars.len(), spec)?;
    let (train, rest) = bars.split_at(s.train);
    let (val, test) = rest.split_at(s.val);
    Ok((train, val, test))
}

/// Per-feature z-score parameters from the training segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; N_FEATURES],
    /// Population standard deviation.
    pub std: [f64; N_FEATURES],
}

impl NormStats {
    pub fn fit(train: &[Bar]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Capacity { needed: 1, available: 0 });
        }
        let n = train.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for b in train {
            for (m, v) in mean.iter_mut().zip(b.features()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; N_FEATURES];
        for b in train {
            for (k, v) in b.features().into_iter().enumerate() {
                var[k] += (v - mean[k]).powi(2);
            }
        }
        let mut std = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            std[k] = (var[k] / n).sqrt();
            if std[k].is_nan() || std[k] <= 1e-12 * mean[k].abs().max(1.0) {
                return Err(Error::DegenerateFeature { feature: super::FEATURE_NAMES[k].to_string() });
            }
        }
        Ok(NormStats { mean, std })
    }

    pub fn normalize_value(&self, feature: usize, raw: f64) -> f64 {
        (raw - self.mean[feature]) / self.std[feature]
    }

    pub fn denormalize_value(&self, feature: usize, z: f64) -> f64 {
        z * self.std[feature] + self.mean[feature]
    }

    /// Row-major `[len, N_FEATURES]` z-scores.
    pub fn normalize(&self, bars: &[Bar]) -> Vec<f64> {
        let mut out = Vec::with_capacity(bars.len() * N_FEATURES);
        for b in bars {
            for (k, v) in b.features().into_iter().enumerate() {
                out.push(self.normalize_value(k, v));
            }
        }
        out
    }

    pub fn denormalize(&self, values: &[f64], feature: usize) -> Vec<f64> {
        values.iter().map(|&z| self.denormalize_value(feature, z)).collect()
    }
}
