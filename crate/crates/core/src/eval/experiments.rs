use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::evaluate::{evaluate, DisplaySample, EvalLabel, Forecaster, DISPLAY_LEN};
use super::report::{MetricsReport, MetricsRow, Scale};
use crate::data::{make_windows, PreparedDataset, RawSeries, SplitSpec, N_FEATURES};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelVariant};
use crate::train::{fit, Checkpoint, TrainConfig, TrainHistory};

/// Label of a checkpoint applied, without fine-tuning, to another dataset.
pub const TRANSFER_LABEL: &str = "Informer^T";

fn label(data: &PreparedDataset, variant: &str) -> EvalLabel {
    EvalLabel { dataset: data.symbol.clone(), interval: data.interval.label().to_string(), variant: variant.to_string() }
}

/// A model with the exact configuration it was trained under.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub train_config: TrainConfig,
    pub history: TrainHistory,
}

/// Builds `variant` from `base` (initialized from the training seed) and
/// fits it on the dataset's train/val segments.
pub fn train_variant(
    data: &PreparedDataset,
    variant: ModelVariant,
    base: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let model = Model::new(variant, base, cfg.seed)?;
    let history = fit(&model, &data.train, &data.val, cfg, |_| {})?;
    Ok(TrainedModel { model, train_config: cfg.clone(), history })
}

/// Test-split metrics of one forecaster on one dataset, both scales.
pub fn evaluate_on(
    forecaster: &dyn Forecaster,
    data: &PreparedDataset,
    geometry: &crate::data::WindowGeometry,
    stride: usize,
    variant: &str,
) -> Result<MetricsReport> {
    let windows = make_windows(&data.test, geometry, stride)?;
    evaluate(forecaster, &windows, &data.stats, &label(data, variant))
}

/// Trained models keyed by dataset id and variant.
pub type TrainedSet = BTreeMap<(String, ModelVariant), Model>;

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    /// One row per (dataset, interval, variant, scale).
    pub report: MetricsReport,
    /// Dataset id and its display sample.
    pub display: Vec<(String, DisplaySample)>,
}

impl ComparisonResult {
    /// Variant names of one dataset, best MAPE first.
    pub fn ranking(&self, dataset: &str, scale: Scale) -> Vec<String> {
        rank_by_mape(&self.report, dataset, scale)
    }
}

/// Orders the variants of `dataset` by MAPE, the deciding criterion when
/// MAE, RMSE and MAPE disagree. Ties keep report order.
pub fn rank_by_mape(report: &MetricsReport, dataset: &str, scale: Scale) -> Vec<String> {
    let mut rows: Vec<&MetricsRow> = report.rows.iter().filter(|r| r.dataset == dataset && r.scale == scale).collect();
    rows.sort_by(|a, b| a.mape.total_cmp(&b.mape));
    rows.into_iter().map(|r| r.variant.clone()).collect()
}

/// Evaluates every requested variant on every dataset's test split and
/// draws one display sample per dataset.
pub fn run_comparison(
    datasets: &[PreparedDataset],
    variants: &[ModelVariant],
    trained: &TrainedSet,
    eval_stride: usize,
    display_seed: u64,
) -> Result<ComparisonResult> {
    let mut report = MetricsReport::default();
    let mut display = Vec::new();
    for data in datasets {
        let mut models = Vec::new();
        for &v in variants {
            let m = trained
                .get(&(data.id(), v))
                .ok_or_else(|| Error::Completeness(format!("no trained {v} model for dataset {}", data.id())))?;
            models.push((v, m));
        }
        let geometry = match models.first() {
            Some((_, m)) => m.config.geometry(),
            None => return Err(Error::Completeness("no variants requested".into())),
        };
        for (v, m) in &models {
            if m.config.geometry() != geometry {
                return Err(Error::Protocol(format!("{v} uses a different window geometry")));
            }
            report.extend(evaluate_on(*m, data, &geometry, eval_stride, v.display_name())?);
        }
        let named: Vec<(String, &dyn Forecaster)> =
            models.iter().map(|(v, m)| (v.display_name().to_string(), *m as &dyn Forecaster)).collect();
        let sample = DisplaySample::build(&data.test, &geometry, &named, &data.stats, DISPLAY_LEN, display_seed)?;
        display.push((data.id(), sample));
    }
    Ok(ComparisonResult { report, display })
}

/// Hash of everything that must match between the two arms of the
/// time-stamp ablation: the model configuration with the time-stamp switch
/// neutralized, and the full training configuration.
pub fn protocol_hash(model: &ModelConfig, train: &TrainConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Key<'a> {
        model: &'a ModelConfig,
        train: &'a TrainConfig,
    }
    let mut model = model.clone();
    model.timestamp_enabled = true;
    let bytes = serde_json::to_vec(&Key { model: &model, train })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Checks that two trained arms differ only in the time-stamp switch.
pub fn check_pair(informer: &TrainedModel, dagger: &TrainedModel) -> Result<String> {
    if informer.model.variant != ModelVariant::Informer || dagger.model.variant != ModelVariant::InformerDagger {
        return Err(Error::Protocol(format!(
            "ablation pair must be Informer and Informer†, got {} and {}",
            informer.model.variant, dagger.model.variant
        )));
    }
    let a = protocol_hash(&informer.model.config, &informer.train_config)?;
    let b = protocol_hash(&dagger.model.config, &dagger.train_config)?;
    if a != b {
        return Err(Error::Protocol(format!("configuration hashes differ: {a} vs {b}")));
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct AblationSeed {
    pub seed: u64,
    /// Informer and Informer† rows, both scales.
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    /// Shared configuration hash with the seed left out.
    pub protocol_hash: String,
    pub per_seed: Vec<AblationSeed>,
    /// Per-metric medians over seeds: one Informer and one Informer† row
    /// per scale.
    pub report: MetricsReport,
}

impl AblationResult {
    pub fn median_mape(&self, variant: ModelVariant, scale: Scale) -> Option<f64> {
        self.report.rows.iter().find(|r| r.variant == variant.display_name() && r.scale == scale).map(|r| r.mape)
    }
}

/// Median; mean of the middle pair for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Evaluates already trained ablation pairs, one per seed, and aggregates
/// them into per-metric medians.
pub fn ablation_from_pairs(
    data: &PreparedDataset,
    pairs: &[(&TrainedModel, &TrainedModel)],
    eval_stride: usize,
) -> Result<AblationResult> {
    if pairs.is_empty() {
        return Err(Error::Completeness("ablation needs at least one seed".into()));
    }
    let mut hash = None;
    let mut per_seed = Vec::new();
    for (inf, dag) in pairs {
        check_pair(inf, dag)?;
        let unseeded = TrainConfig { seed: 0, ..inf.train_config.clone() };
        let h = protocol_hash(&inf.model.config, &unseeded)?;
        if hash.as_ref().is_some_and(|prev| *prev != h) {
            return Err(Error::Protocol("seeds were trained under different configurations".into()));
        }
        hash = Some(h);
        let geometry = inf.model.config.geometry();
        let mut report = evaluate_on(&inf.model, data, &geometry, eval_stride, inf.model.variant.display_name())?;
        report.extend(evaluate_on(&dag.model, data, &geometry, eval_stride, dag.model.variant.display_name())?);
        per_seed.push(AblationSeed { seed: inf.train_config.seed, report });
    }
    let mut report = MetricsReport::default();
    for variant in [ModelVariant::Informer, ModelVariant::InformerDagger] {
        for scale in [Scale::Normalized, Scale::Raw] {
            let rows: Vec<&MetricsRow> =
                per_seed.iter().filter_map(|s| s.report.find(&data.symbol, variant.display_name(), scale)).collect();
            let med = |f: fn(&MetricsRow) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let first = rows[0];
            report.push(MetricsRow {
                mae: med(|r| r.mae).unwrap_or(f64::NAN),
                rmse: med(|r| r.rmse).unwrap_or(f64::NAN),
                mape: med(|r| r.mape).unwrap_or(f64::NAN),
                ..first.clone()
            });
        }
    }
    Ok(AblationResult { protocol_hash: hash.expect("non-empty pairs"), per_seed, report })
}

/// Trains Informer and Informer† under identical settings for every seed
/// and compares them on the test split.
pub fn run_ablation(
    data: &PreparedDataset,
    base: &ModelConfig,
    cfg: &TrainConfig,
    seeds: &[u64],
    eval_stride: usize,
) -> Result<AblationResult> {
    let mut trained = Vec::new();
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..cfg.clone() };
        let inf = train_variant(data, ModelVariant::Informer, base, &cfg)?;
        let dag = train_variant(data, ModelVariant::InformerDagger, base, &cfg)?;
        trained.push((inf, dag));
    }
    let pairs: Vec<(&TrainedModel, &TrainedModel)> = trained.iter().map(|(a, b)| (a, b)).collect();
    ablation_from_pairs(data, &pairs, eval_stride)
}

/// Which normalization statistics a transferred model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferStats {
    /// Fit on the target's own training split.
    #[default]
    Target,
    /// Those stored in the checkpoint.
    Source,
}

impl std::str::FromStr for TransferStats {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(TransferStats::Target),
            "source" => Ok(TransferStats::Source),
            other => Err(Error::Config(format!("unknown transfer statistics `{other}` (use target or source)"))),
        }
    }
}

/// A dataset the checkpoint is applied to, optionally with a natively
/// trained model for side-by-side rows.
#[derive(Debug, Clone)]
pub struct TransferTarget<'a> {
    pub series: &'a RawSeries,
    pub native: Option<&'a Model>,
}

/// Applies the checkpointed model to each target's test windows without
/// any fine-tuning.
pub fn run_transfer(
    checkpoint: &Checkpoint,
    targets: &[TransferTarget<'_>],
    spec: &SplitSpec,
    stats: TransferStats,
    eval_stride: usize,
) -> Result<MetricsReport> {
    let cfg = &checkpoint.model.config;
    if cfg.enc_in != N_FEATURES || cfg.dec_in != N_FEATURES {
        return Err(Error::Integrity(format!(
            "checkpoint expects {} encoder / {} decoder features, datasets provide {N_FEATURES}",
            cfg.enc_in, cfg.dec_in
        )));
    }
    if targets.is_empty() {
        return Err(Error::Completeness("no transfer targets".into()));
    }
    let geometry = cfg.geometry();
    let mut report = MetricsReport::default();
    for t in targets {
        let fixed = match stats {
            TransferStats::Target => None,
            TransferStats::Source => Some(checkpoint.norm_stats.clone()),
        };
        let data = PreparedDataset::new(t.series, spec, fixed)?;
        if let Some(native) = t.native {
            report.extend(evaluate_on(native, &data, &native.config.geometry(), eval_stride, native.variant.display_name())?);
        }
        report.extend(evaluate_on(&checkpoint.model, &data, &geometry, eval_stride, TRANSFER_LABEL)?);
    }
    Ok(report)
}
