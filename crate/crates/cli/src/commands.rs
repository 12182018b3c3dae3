use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use informer::attention::bench_attention;
use informer::data::{DatasetEntry, Manifest, PreparedDataset, RawSeries};
use informer::eval::{
    ablation_from_pairs, evaluate_on, protocol_hash, run_comparison, run_transfer, train_variant, MetricsReport,
    ReportFormat, Scale, TrainedModel, TrainedSet, TransferTarget,
};
use informer::model::{Model, ModelVariant};
use informer::synthetic::spike_series;
use informer::train::{fit, load_checkpoint, save_checkpoint, Checkpoint, Provenance, TrainConfig, TrainHistory};
use informer::{Error, Result};
use serde::Serialize;

use crate::config::{RunConfig, EFFECTIVE_CONFIG};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const HISTORY_FILE: &str = "history.json";
pub const TIMING_FILE: &str = "timing.json";

/// Runs `command` with a resolved configuration. The effective
/// configuration is written to the output directory first.
pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    fs::create_dir_all(out)?;
    fs::write(out.join(EFFECTIVE_CONFIG), cfg.to_toml()?)?;
    match command {
        "ingest" => ingest(cfg),
        "train" => train(cfg).map(|_| ()),
        "evaluate" => evaluate(cfg),
        "compare" => compare(cfg),
        "ablate" => ablate(cfg),
        "transfer" => transfer(cfg),
        "bench-attention" => bench(cfg),
        "synth" => synth(cfg),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

fn manifest(cfg: &RunConfig) -> Result<Manifest> {
    let path = cfg.manifest.as_ref().ok_or_else(|| Error::Config("no dataset manifest given (--manifest)".into()))?;
    Manifest::load(path)
}

/// Entries named in the config, or every manifest entry.
fn selected(cfg: &RunConfig) -> Result<Vec<DatasetEntry>> {
    let m = manifest(cfg)?;
    let entries: Vec<DatasetEntry> = if cfg.datasets.is_empty() {
        m.datasets.clone()
    } else {
        cfg.datasets.iter().map(|k| m.find(k).cloned()).collect::<Result<_>>()?
    };
    if entries.is_empty() {
        return Err(Error::Config("manifest lists no datasets".into()));
    }
    Ok(entries)
}

fn single(cfg: &RunConfig) -> Result<DatasetEntry> {
    let mut entries = selected(cfg)?;
    if entries.len() != 1 {
        return Err(Error::Config(format!("choose one dataset (--dataset); {} selected", entries.len())));
    }
    Ok(entries.remove(0))
}

fn prepare(entry: &DatasetEntry, cfg: &RunConfig) -> Result<PreparedDataset> {
    PreparedDataset::new(&entry.load()?, &cfg.split, None)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<name>.json` and `<name>.csv`, restricted to the configured
/// scale, and prints the table.
fn write_report(cfg: &RunConfig, name: &str, report: &MetricsReport) -> Result<()> {
    let report = match cfg.scale {
        Some(s) => report.filter_scale(s),
        None => report.clone(),
    };
    let out = cfg.out_dir();
    report.write(&out.join(format!("{name}.json")), ReportFormat::Json)?;
    report.write(&out.join(format!("{name}.csv")), ReportFormat::Csv)?;
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    dataset: String,
    interval: String,
    rows: usize,
    train: usize,
    val: usize,
    test: usize,
    first: String,
    last: String,
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let mut summary = Vec::new();
    println!("| Dataset | Time scale | Rows | Train | Val | Test | First | Last |");
    println!("|---|---|---|---|---|---|---|---|");
    for entry in selected(cfg)? {
        let series = entry.load()?;
        let sizes = informer::data::split_sizes(series.len(), &cfg.split)?;
        let bars = series.bars();
        let s = DatasetSummary {
            dataset: series.symbol.clone(),
            interval: series.interval.label().to_string(),
            rows: series.len(),
            train: sizes.train,
            val: sizes.val,
            test: sizes.test,
            first: bars[0].datetime.to_string(),
            last: bars[bars.len() - 1].datetime.to_string(),
        };
        println!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            s.dataset, s.interval, s.rows, s.train, s.val, s.test, s.first, s.last
        );
        summary.push(s);
    }
    write_json(&cfg.out_dir().join("summary.json"), &summary)
}

#[derive(Debug, Serialize)]
struct Timing {
    epoch_seconds: Vec<f64>,
    total_seconds: f64,
}

fn write_history(dir: &Path, stem: &str, history: &TrainHistory) -> Result<()> {
    write_json(&dir.join(format!("{stem}history.json")), history)?;
    let timing = Timing {
        epoch_seconds: history.epochs.iter().map(|e| e.wall_seconds).collect(),
        total_seconds: history.wall_seconds(),
    };
    write_json(&dir.join(format!("{stem}timing.json")), &timing)
}

fn one_variant(cfg: &RunConfig) -> Result<ModelVariant> {
    match cfg.variants.as_slice() {
        [] => Ok(ModelVariant::Informer),
        [v] => Ok(*v),
        more => Err(Error::Config(format!("choose one variant (--variant); {} given", more.len()))),
    }
}

/// Trains one variant and writes the checkpoint, history and timing.
pub fn train(cfg: &RunConfig) -> Result<TrainHistory> {
    let entry = single(cfg)?;
    let variant = one_variant(cfg)?;
    let data = prepare(&entry, cfg)?;
    let model = Model::new(variant, &cfg.model, cfg.train.seed)?;
    eprintln!("training {} on {} ({} train bars)", variant.display_name(), data.id(), data.sizes.train);
    let history = fit(&model, &data.train, &data.val, &cfg.train, |r| {
        eprintln!(
            "epoch {:>2}  train {:.6}  val {:.6}  lr {:.3e}  {:.1}s",
            r.epoch, r.train_loss, r.val_loss, r.lr, r.wall_seconds
        )
    })?;
    let out = cfg.out_dir();
    let provenance = Provenance { dataset: data.id(), seed: cfg.train.seed, epoch: history.best_epoch };
    save_checkpoint(&model, &data.stats, &provenance, &out.join(CHECKPOINT_FILE))?;
    write_history(out, "", &history)?;
    println!(
        "best epoch {} (val {:.6}), {:?}; checkpoint {}",
        history.best_epoch,
        history.best_val_loss,
        history.stop_reason,
        out.join(CHECKPOINT_FILE).display()
    );
    Ok(history)
}

fn checkpoint(cfg: &RunConfig) -> Result<Checkpoint> {
    let path = cfg.checkpoint.as_ref().ok_or_else(|| Error::Config("no checkpoint given (--checkpoint)".into()))?;
    load_checkpoint(path)
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let ck = checkpoint(cfg)?;
    let geometry = ck.model.config.geometry();
    let mut report = MetricsReport::default();
    for entry in selected(cfg)? {
        let data = prepare(&entry, cfg)?;
        report.extend(evaluate_on(&ck.model, &data, &geometry, cfg.eval.stride, ck.model.variant.display_name())?);
    }
    write_report(cfg, "report", &report)
}

fn compare(cfg: &RunConfig) -> Result<()> {
    let variants = if cfg.variants.is_empty() { ModelVariant::ALL.to_vec() } else { cfg.variants.clone() };
    let datasets: Vec<PreparedDataset> = selected(cfg)?.iter().map(|e| prepare(e, cfg)).collect::<Result<_>>()?;
    let out = cfg.out_dir();
    let ck_dir = out.join("checkpoints");
    fs::create_dir_all(&ck_dir)?;
    let mut trained = TrainedSet::new();
    for data in &datasets {
        for &v in &variants {
            eprintln!("training {} on {}", v.display_name(), data.id());
            let t = train_variant(data, v, &cfg.model, &cfg.train)?;
            let stem = format!("{}-{}", data.id(), v.as_str());
            let provenance = Provenance { dataset: data.id(), seed: cfg.train.seed, epoch: t.history.best_epoch };
            save_checkpoint(&t.model, &data.stats, &provenance, &ck_dir.join(format!("{stem}.ckpt")))?;
            write_history(&ck_dir, &format!("{stem}."), &t.history)?;
            trained.insert((data.id(), v), t.model);
        }
    }
    let result = run_comparison(&datasets, &variants, &trained, cfg.eval.stride, cfg.seed())?;
    write_report(cfg, "report", &result.report)?;
    let scale = cfg.scale.unwrap_or(Scale::Raw);
    let mut ranking = BTreeMap::new();
    for data in &datasets {
        let order = result.ranking(&data.symbol, scale);
        println!("{} ranking by {scale} MAPE: {}", data.id(), order.join(" < "));
        ranking.insert(data.id(), order);
    }
    write_json(&out.join("ranking.json"), &ranking)?;
    for (id, sample) in &result.display {
        sample.write(&out.join(format!("display_{id}.csv")))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SeedReport<'a> {
    seed: u64,
    report: &'a MetricsReport,
}

fn ablate(cfg: &RunConfig) -> Result<()> {
    let entries = selected(cfg)?;
    let dag_model = cfg.ablation.dagger_model.clone().unwrap_or_else(|| cfg.model.clone());
    let dag_train = cfg.ablation.dagger_train.clone().unwrap_or_else(|| cfg.train.clone());
    let a = protocol_hash(&ModelVariant::Informer.apply(&cfg.model), &cfg.train)?;
    let b = protocol_hash(&ModelVariant::InformerDagger.apply(&dag_model), &dag_train)?;
    if a != b {
        return Err(Error::Protocol(
            "Informer and Informer† must share every model and training setting except the time stamp".into(),
        ));
    }
    let mut report = MetricsReport::default();
    let mut per_seed = Vec::new();
    for entry in &entries {
        let data = prepare(entry, cfg)?;
        let mut pairs: Vec<(TrainedModel, TrainedModel)> = Vec::new();
        for seed in cfg.ablation_seeds() {
            eprintln!("seed {seed}: training Informer and Informer† on {}", data.id());
            let inf = train_variant(&data, ModelVariant::Informer, &cfg.model, &TrainConfig { seed, ..cfg.train.clone() })?;
            let dag =
                train_variant(&data, ModelVariant::InformerDagger, &dag_model, &TrainConfig { seed, ..dag_train.clone() })?;
            pairs.push((inf, dag));
        }
        let refs: Vec<(&TrainedModel, &TrainedModel)> = pairs.iter().map(|(a, b)| (a, b)).collect();
        let result = ablation_from_pairs(&data, &refs, cfg.eval.stride)?;
        report.extend(result.report);
        per_seed.extend(result.per_seed);
    }
    write_report(cfg, "report", &report)?;
    let seeds: Vec<SeedReport> = per_seed.iter().map(|s| SeedReport { seed: s.seed, report: &s.report }).collect();
    write_json(&cfg.out_dir().join("per_seed.json"), &seeds)
}

fn transfer(cfg: &RunConfig) -> Result<()> {
    let ck = checkpoint(cfg)?;
    let m = manifest(cfg)?;
    let entries = selected(cfg)?;
    let mut natives: BTreeMap<String, Model> = BTreeMap::new();
    for (key, path) in &cfg.transfer.natives {
        natives.insert(m.find(key)?.id(), load_checkpoint(path)?.model);
    }
    let series: Vec<RawSeries> = entries.iter().map(DatasetEntry::load).collect::<Result<_>>()?;
    let targets: Vec<TransferTarget> = series
        .iter()
        .zip(&entries)
        .map(|(s, e)| TransferTarget { series: s, native: natives.get(&e.id()) })
        .collect();
    let report = run_transfer(&ck, &targets, &cfg.split, cfg.transfer.stats, cfg.eval.stride)?;
    write_report(cfg, "report", &report)
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let b = &cfg.bench;
    let rows = bench_attention(&b.lengths, b.depth, b.factor, cfg.seed())?;
    let first = &rows[0];
    let mut csv = String::from("L,u,sample_count,full,exact_measurement,exact_attention,sampled_measurement,sampled_attention,exact_ratio,sampled_ratio,l_ln_l_ratio,quadratic_ratio\n");
    println!("|   L |  u | full | exact M | exact attn | sampled M | sampled attn | exact ratio | sampled ratio | L ln L ratio | L^2 ratio |");
    println!("|---|---|---|---|---|---|---|---|---|---|---|");
    for r in &rows {
        let exact_ratio = r.exact.measurement as f64 / first.exact.measurement as f64;
        let sampled_ratio = r.sampled.total() as f64 / first.sampled.total() as f64;
        let lnl = r.l_ln_l() / first.l_ln_l();
        let quad = (r.len as f64 / first.len as f64).powi(2);
        println!(
            "| {} | {} | {} | {} | {} | {} | {} | {exact_ratio:.3} | {sampled_ratio:.3} | {lnl:.3} | {quad:.3} |",
            r.len, r.u, r.full.attention, r.exact.measurement, r.exact.attention, r.sampled.measurement, r.sampled.attention
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{exact_ratio},{sampled_ratio},{lnl},{quad}\n",
            r.len,
            r.u,
            r.sample_count,
            r.full.attention,
            r.exact.measurement,
            r.exact.attention,
            r.sampled.measurement,
            r.sampled.attention
        ));
    }
    let out = cfg.out_dir();
    fs::write(out.join("bench.csv"), csv)?;
    write_json(&out.join("bench.json"), &rows)
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let series = spike_series(&cfg.synth)?;
    let out = cfg.out_dir();
    let file = format!("{}.csv", series.id());
    series.write_csv(&out.join(&file))?;
    let manifest = Manifest {
        datasets: vec![DatasetEntry {
            symbol: series.symbol.clone(),
            bar_interval: series.interval,
            path: PathBuf::from(&file),
            expected_rows: Some(series.len()),
        }],
    };
    manifest.save(&out.join("manifest.toml"))?;
    println!("wrote {} bars to {} and manifest.toml", series.len(), out.join(file).display());
    Ok(())
}
