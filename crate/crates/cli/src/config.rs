use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use informer::data::SplitSpec;
use informer::eval::{Scale, TransferStats};
use informer::model::{ModelConfig, ModelVariant};
use informer::synthetic::SpikeSeriesSpec;
use informer::train::TrainConfig;
use informer::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::Flags;

/// Seed used when neither the file nor the command line sets one.
pub const DEFAULT_SEED: u64 = 2022;

/// Name of the effective configuration written beside every output.
pub const EFFECTIVE_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Offset between consecutive test windows.
    pub stride: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { stride: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Seeds of the repeated pairs; empty means three consecutive seeds
    /// starting at the run seed.
    pub seeds: Vec<u64>,
    /// Overrides for the Informer† arm. Any difference other than the
    /// time-stamp switch is refused.
    pub dagger_model: Option<ModelConfig>,
    pub dagger_train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub stats: TransferStats,
    /// Natively trained checkpoints by dataset key, for side-by-side rows.
    pub natives: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub depth: usize,
    pub factor: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { lengths: vec![64, 128, 256], depth: 32, factor: 5.0 }
    }
}

/// Everything a run needs. Parsed from TOML, then command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this file is meant for; checked when present.
    pub command: Option<String>,
    pub manifest: Option<PathBuf>,
    /// Dataset keys (`SYMBOL-interval` or bare symbol); empty means all.
    pub datasets: Vec<String>,
    /// Variants to train; empty means the command's default.
    pub variants: Vec<ModelVariant>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// The single source of randomness; copied into every seeded section.
    pub seed: Option<u64>,
    /// Restricts reports to one scale; both when absent.
    pub scale: Option<Scale>,
    pub split: SplitSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
    pub transfer: TransferConfig,
    pub bench: BenchConfig,
    pub synth: SpikeSeriesSpec,
}

fn absolute(path: &Path) -> Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(path))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads the file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        let dir = absolute(path.parent().unwrap_or(Path::new(".")))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        cfg.manifest.as_mut().map(fix);
        cfg.checkpoint.as_mut().map(fix);
        cfg.out.as_mut().map(fix);
        cfg.transfer.natives.values_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Applies flags, propagates the seed and makes every path absolute, so
    /// the echoed file reruns the same experiment from anywhere.
    pub fn resolve(mut self, command: &str, flags: &Flags) -> Result<Self> {
        match &self.command {
            Some(c) if c != command => {
                return Err(Error::Config(format!("config is for `{c}`, not `{command}`")));
            }
            _ => self.command = Some(command.to_string()),
        }
        if let Some(s) = flags.seed {
            self.seed = Some(s);
        }
        if let Some(p) = &flags.out {
            self.out = Some(p.clone());
        }
        if let Some(p) = &flags.manifest {
            self.manifest = Some(p.clone());
        }
        if let Some(p) = &flags.checkpoint {
            self.checkpoint = Some(p.clone());
        }
        if !flags.dataset.is_empty() {
            self.datasets = flags.dataset.clone();
        }
        if !flags.variant.is_empty() {
            self.variants = flags.variant.clone();
        }
        if let Some(s) = flags.scale {
            self.scale = Some(s);
        }
        if let Some(s) = flags.stats {
            self.transfer.stats = s;
        }
        if let Some(l) = &flags.lengths {
            self.bench.lengths = l.clone();
        }

        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        self.train.seed = seed;
        self.synth.seed = seed;
        if let Some(t) = &mut self.ablation.dagger_train {
            t.seed = seed;
        }

        let out = self.out.take().unwrap_or_else(|| PathBuf::from("runs").join(command));
        self.out = Some(absolute(&out)?);
        self.manifest = self.manifest.as_deref().map(absolute).transpose()?;
        self.checkpoint = self.checkpoint.as_deref().map(absolute).transpose()?;
        for p in self.transfer.natives.values_mut() {
            *p = absolute(p)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.eval.stride == 0 {
            return Err(Error::Config("eval stride must be positive".into()));
        }
        if self.bench.factor <= 0.0 {
            return Err(Error::Config("bench factor must be positive".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("."))
    }

    /// Ablation seeds, defaulting to three consecutive ones.
    pub fn ablation_seeds(&self) -> Vec<u64> {
        if self.ablation.seeds.is_empty() {
            let s = self.seed();
            vec![s, s + 1, s + 2]
        } else {
            self.ablation.seeds.clone()
        }
    }
}
