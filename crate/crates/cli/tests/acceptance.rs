//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach the test log.

use std::cell::OnceCell;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use informer::attention::{
    bench_attention, full_attention, probsparse_attention, sparsity_measure, AttentionInputs, AttentionKind,
    DotProductCounter, MultiHeadAttention, SparsityMode,
};
use informer::data::{
    make_windows, split_sizes, BarInterval, DatasetEntry, Manifest, PreparedDataset, SplitSpec,
    WindowBatch, WindowGeometry,
};
use informer::eval::{ablation_from_pairs, evaluate_on, mae, mape, rmse, train_variant, MetricsReport, Persistence,
    Scale, TrainedModel};
use informer::gradcheck::check_gradients;
use informer::model::{
    build_decoder_input, DecoderLayer, DistilLayer, EncoderLayer, FeedForward, ForwardCtx, LstmBaseline, Model,
    ModelConfig, ModelVariant,
};
use informer::nn::{maxpool1d, Conv1d, Embedding, LayerNorm, Linear, Parameterized};
use informer::synthetic::{spike_series, SpikeSeriesSpec};
use informer::train::{decode_checkpoint, encode_checkpoint, evaluate_loss, mse_loss, Provenance, TrainConfig,
    TrainHistory};
use informer::{Result, Tensor};
use informer_cli::commands::dispatch;
use informer_cli::{Flags, RunConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn(&Shared) -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn tensor(data: Vec<f64>, shape: &[usize]) -> Tensor {
    Tensor::from_vec(data, shape).unwrap()
}

fn param(shape: &[usize], seed: u64) -> Tensor {
    Tensor::parameter(uniform(shape.iter().product(), &mut rng(seed)), shape).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: informer::Error) -> String {
    format!("error: {e}")
}

// 1. Gradient correctness.

fn grad_err(params: Vec<Tensor>, f: impl Fn() -> Result<Tensor>) -> Result<f64> {
    let probe = |out: &Tensor| -> Result<Tensor> {
        let w = tensor(uniform(out.numel(), &mut rng(99)), out.shape());
        Ok(out.mul(&w)?.sum_all())
    };
    let report = check_gradients(&params, || probe(&f()?), 1e-5, 24, 1)?;
    Ok(report.max_rel_err)
}

fn with(m: &impl Parameterized, extra: &[&Tensor]) -> Vec<Tensor> {
    let mut ps: Vec<Tensor> = m.named_params().into_iter().map(|(_, t)| t).collect();
    ps.extend(extra.iter().map(|t| (*t).clone()));
    ps
}

fn layer_errors() -> Result<Vec<(&'static str, f64)>> {
    let cfg = ModelConfig::tiny();
    let mut r = rng(7);
    let x = param(&[2, 8, cfg.d_model], 8);
    let mem = param(&[2, 5, cfg.d_model], 9);
    let mut out = Vec::new();

    let lin = Linear::new(cfg.d_model, 3, true, &mut r);
    out.push(("linear", grad_err(with(&lin, &[&x]), || lin.forward(&x))?));
    let conv = Conv1d::new(cfg.d_model, 4, 3, true, &mut r);
    out.push(("conv1d", grad_err(with(&conv, &[&x]), || conv.forward(&x))?));
    let norm = LayerNorm::new(cfg.d_model, 1e-5);
    out.push(("layernorm", grad_err(with(&norm, &[&x]), || norm.forward(&x))?));
    let emb = Embedding::new(7, 4, 1.0, &mut r);
    out.push(("embedding", grad_err(with(&emb, &[]), || emb.forward(&[0, 3, 3, 6], &[2, 2]))?));
    let odd = param(&[2, 7, 3], 10);
    out.push(("maxpool", grad_err(vec![odd.clone()], || maxpool1d(&odd))?));

    for causal in [false, true] {
        let (q, k, v) = (param(&[2, 8, 4], 11), param(&[2, 8, 4], 12), param(&[2, 8, 4], 13));
        let qkv = vec![q.clone(), k.clone(), v.clone()];
        let inputs = || AttentionInputs::new(q.clone(), k.clone(), v.clone(), causal);
        out.push((
            "full attention",
            grad_err(qkv.clone(), || full_attention(&inputs()?, &mut DotProductCounter::default()))?,
        ));
        out.push((
            "probsparse attention",
            grad_err(qkv, || {
                let mut c = DotProductCounter::default();
                Ok(probsparse_attention(&inputs()?, 3, SparsityMode::Exact, 8, &mut rng(0), &mut c)?.0)
            })?,
        ));
    }
    for kind in [AttentionKind::Full, AttentionKind::ProbSparse] {
        let mha = MultiHeadAttention::new(cfg.d_model, cfg.n_heads, kind, 1.0, SparsityMode::Exact, &mut r)?;
        out.push((
            "multi-head cross",
            grad_err(with(&mha, &[&x, &mem]), || {
                mha.forward(&x, &mem, false, &mut rng(0), &mut DotProductCounter::default())
            })?,
        ));
    }
    let ff = FeedForward::new(&cfg, &mut r);
    out.push(("feed-forward", grad_err(with(&ff, &[&x]), || ff.forward(&x, 0.0, &mut ForwardCtx::eval(0)))?));
    let enc = EncoderLayer::new(&cfg, &mut r)?;
    out.push(("encoder layer", grad_err(with(&enc, &[&x]), || enc.forward(&x, &mut ForwardCtx::eval(0)))?));
    let distil = DistilLayer::new(cfg.d_model, &mut r);
    out.push(("distil layer", grad_err(with(&distil, &[&x]), || distil.forward(&x))?));
    let dec = DecoderLayer::new(&cfg, &mut r)?;
    out.push((
        "decoder layer",
        grad_err(with(&dec, &[&x, &mem]), || dec.forward(&x, &mem, &mut ForwardCtx::eval(0)))?,
    ));
    let lstm = LstmBaseline::new(&cfg, &mut r);
    let seq = param(&[2, cfg.seq_len, cfg.enc_in], 14);
    out.push(("lstm", grad_err(with(&lstm, &[&seq]), || lstm.forward(&seq, &mut ForwardCtx::eval(0)))?));
    Ok(out)
}

fn model_errors() -> Result<Vec<(&'static str, f64)>> {
    let series = spike_series(&SpikeSeriesSpec { n_bars: 400, ..Default::default() })?;
    let data = PreparedDataset::new(&series, &SplitSpec::default(), None)?;
    let cfg = ModelConfig::tiny();
    let windows = make_windows(&data.train, &cfg.geometry(), 37)?;
    let batch = windows.batch(&windows.starts[..3])?;
    let mut out = Vec::new();
    for v in ModelVariant::ALL {
        let model = Model::new(v, &cfg, 21)?;
        for (name, t) in model.named_params() {
            if name.contains("temporal") {
                let n = t.numel();
                t.data_mut().copy_from_slice(&uniform(n, &mut rng(22)));
            }
        }
        let params = with(&model, &[]);
        out.push((v.as_str(), grad_err(params, || model.forward(&batch, &mut ForwardCtx::eval(0)))?));
    }
    Ok(out)
}

fn criterion_1(_: &Shared) -> Outcome {
    let start = Instant::now();
    let worst = |v: &[(&'static str, f64)]| v.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let layers = layer_errors().map_err(fail)?;
    let models = model_errors().map_err(fail)?;
    let (ln, le) = worst(&layers);
    let (mn, me) = worst(&models);
    let secs = start.elapsed().as_secs_f64();
    check(
        le < 1e-4 && me < 1e-3 && secs < 60.0,
        format!("worst layer {ln} {le:.2e} (< 1e-4), worst model {mn} {me:.2e} (< 1e-3), {secs:.1}s"),
    )
}

// 2. ProbSparse with u = L_Q is full attention.

fn criterion_2(_: &Shared) -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for causal in [false, true] {
        for _ in 0..100 {
            let mk = |r: &mut ChaCha8Rng| tensor(uniform(16 * 8, r).iter().map(|v| v * 3.0).collect(), &[16, 8]);
            let inp = AttentionInputs::new(mk(&mut r), mk(&mut r), mk(&mut r), causal).map_err(fail)?;
            let full = full_attention(&inp, &mut DotProductCounter::default()).map_err(fail)?;
            let (sparse, _) =
                probsparse_attention(&inp, 16, SparsityMode::Exact, 16, &mut r, &mut DotProductCounter::default())
                    .map_err(fail)?;
            for (a, b) in full.to_vec().iter().zip(sparse.to_vec()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst < 1e-10, format!("max abs diff {worst:.2e} over 200 cases (< 1e-10)"))
}

// 3. Sparsity measurement invariants.

fn exact_m(q: &[f64], k: &[f64], lq: usize, lk: usize, d: usize) -> std::result::Result<Vec<f64>, String> {
    let inp = AttentionInputs::new(tensor(q.to_vec(), &[lq, d]), tensor(k.to_vec(), &[lk, d]), tensor(k.to_vec(), &[lk, d]), false)
        .map_err(fail)?;
    let s = sparsity_measure(&inp, SparsityMode::Exact, lk, 1, &mut rng(0), &mut DotProductCounter::default())
        .map_err(fail)?;
    Ok(s.m)
}

fn brute_force_m(q: &[f64], k: &[f64], lq: usize, lk: usize, d: usize) -> Vec<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    (0..lq)
        .map(|i| {
            let scores: Vec<f64> =
                (0..lk).map(|j| (0..d).map(|t| q[i * d + t] * k[j * d + t]).sum::<f64>() * scale).collect();
            let lse = scores.iter().map(|s| s.exp()).sum::<f64>().ln();
            lse - scores.iter().sum::<f64>() / lk as f64
        })
        .collect()
}

fn criterion_3(_: &Shared) -> Outcome {
    let mut r = rng(3);
    let (mut bound_gap, mut const_err, mut shift_err, mut brute_err) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for case in 0..200 {
        let (lq, lk, d) = (8, 8, 4);
        let q: Vec<f64> = uniform(lq * d, &mut r).iter().map(|v| v * 2.0).collect();
        let k: Vec<f64> = uniform(lk * d, &mut r).iter().map(|v| v * 2.0).collect();
        let m = exact_m(&q, &k, lq, lk, d)?;
        let ln_lk = (lk as f64).ln();
        for v in &m {
            bound_gap = bound_gap.min(v - ln_lk);
        }
        for (a, b) in m.iter().zip(brute_force_m(&q, &k, lq, lk, d)) {
            brute_err = brute_err.max((a - b).abs());
        }
        // Shifting every key by one vector adds a per-query constant to its scores.
        let s = uniform(d, &mut r);
        let shifted: Vec<f64> = k.iter().enumerate().map(|(i, v)| v + s[i % d]).collect();
        for (a, b) in m.iter().zip(exact_m(&q, &shifted, lq, lk, d)?) {
            shift_err = shift_err.max((a - b).abs());
        }
        // Identical keys give every query constant scores.
        let row = uniform(d, &mut r);
        let same: Vec<f64> = (0..lk).flat_map(|_| row.clone()).collect();
        for v in exact_m(&q, &same, lq, lk, d)? {
            const_err = const_err.max((v - ln_lk).abs());
        }
        if case == 0 {
            let zeros = vec![0.0; lq * d];
            for v in exact_m(&zeros, &k, lq, lk, d)? {
                const_err = const_err.max((v - ln_lk).abs());
            }
        }
    }
    check(
        bound_gap >= -1e-9 && const_err < 1e-12 && shift_err < 1e-12 && brute_err < 1e-12,
        format!(
            "min M - ln L_K {bound_gap:.2e} (>= -1e-9), constant {const_err:.1e}, shift {shift_err:.1e}, \
             brute force {brute_err:.1e} (< 1e-12)"
        ),
    )
}

// Shared synthetic data for the model-level criteria.

fn desk_data() -> &'static PreparedDataset {
    static DATA: OnceLock<PreparedDataset> = OnceLock::new();
    DATA.get_or_init(|| {
        let series = spike_series(&SpikeSeriesSpec::default()).unwrap();
        PreparedDataset::new(&series, &SplitSpec::default(), None).unwrap()
    })
}

fn first_batch(data: &PreparedDataset, geometry: &WindowGeometry, n: usize) -> Result<WindowBatch> {
    let w = make_windows(&data.test, geometry, 7)?;
    w.batch(&w.starts[..n])
}

// 4. Distilling schedule.

fn criterion_4(_: &Shared) -> Outcome {
    let cfg = ModelConfig::default();
    let model = Model::new(ModelVariant::Informer, &cfg, 4).map_err(fail)?;
    let batch = first_batch(desk_data(), &cfg.geometry(), 2).map_err(fail)?;
    let mut ctx = ForwardCtx::eval(0);
    informer::no_grad(|| model.forward(&batch, &mut ctx)).map_err(fail)?;
    let lengths = ctx.encoder_lengths.clone();
    let layer = DistilLayer::new(4, &mut rng(4));
    let mut halved = Vec::new();
    for l in [5usize, 7, 96, 97] {
        let out = layer.forward(&tensor(uniform(l * 4, &mut rng(l as u64)), &[1, l, 4])).map_err(fail)?;
        halved.push((l, out.shape()[1]));
    }
    let ceil_ok = halved.iter().all(|&(l, h)| h == l.div_ceil(2));
    check(lengths == [96, 48, 24] && ceil_ok, format!("encoder lengths {lengths:?}, distil {halved:?}"))
}

// 5. One-shot decoding.

fn criterion_5(_: &Shared) -> Outcome {
    let mut calls = Vec::new();
    for pred_len in [24, 48] {
        let cfg = ModelConfig { pred_len, ..ModelConfig::default() };
        let model = Model::new(ModelVariant::Informer, &cfg, 5).map_err(fail)?;
        let batch = first_batch(desk_data(), &cfg.geometry(), 2).map_err(fail)?;
        let mut ctx = ForwardCtx::eval(0);
        let out = informer::no_grad(|| model.forward(&batch, &mut ctx)).map_err(fail)?;
        calls.push((pred_len, ctx.decoder_invocations, out.shape()[1]));
    }
    let cfg = ModelConfig::default();
    let batch = first_batch(desk_data(), &cfg.geometry(), 1).map_err(fail)?;
    let dec_len = build_decoder_input(&batch, &cfg).map_err(fail)?.0.shape()[1];
    let ok = calls.iter().all(|&(ly, n, out)| n == 1 && out == ly) && dec_len == 72;
    check(ok, format!("(L_y, decoder calls, output length) {calls:?}, decoder input length {dec_len}"))
}

// 6. Dot-product growth.

fn criterion_6(_: &Shared) -> Outcome {
    let rows = bench_attention(&[64, 256], 32, 5.0, 6).map_err(fail)?;
    let (lo, hi) = (&rows[0], &rows[1]);
    let total = |c: &DotProductCounter| (c.measurement + c.attention) as f64;
    let sampled = total(&hi.sampled) / total(&lo.sampled);
    let predicted = hi.l_ln_l() / lo.l_ln_l();
    let exact = hi.exact.measurement as f64 / lo.exact.measurement as f64;
    check(
        sampled < 16.0 && sampled < 2.0 * predicted && (exact - 16.0).abs() <= 1.6,
        format!("sampled ratio {sampled:.3} (< 16, < 2 x {predicted:.3}), exact measurement ratio {exact:.3} (16 +- 10%)"),
    )
}

// 7. Informer† ignores calendar stamps.

fn criterion_7(_: &Shared) -> Outcome {
    let cfg = ModelConfig::default();
    let dagger = Model::new(ModelVariant::InformerDagger, &cfg, 7).map_err(fail)?;
    let full = Model::new(ModelVariant::Informer, &cfg, 7).map_err(fail)?;
    let batch = first_batch(desk_data(), &cfg.geometry(), 4).map_err(fail)?;
    let mut shuffled = batch.clone();
    let mut r = rng(7);
    shuffled.enc_stamps.shuffle(&mut r);
    shuffled.future_stamps.shuffle(&mut r);
    let a = dagger.predict(&batch, 0).map_err(fail)?;
    let b = dagger.predict(&shuffled, 0).map_err(fail)?;
    let bitwise = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    let delta = full.param_count() - dagger.param_count();
    let tables = 2 * cfg.d_model * (cfg.year_vocab + 12 + cfg.week_field.cardinality() + 24 + 60);
    check(
        bitwise && delta == tables && full.timestamp_param_count() == tables,
        format!("output bitwise invariant: {bitwise}, parameter delta {delta}, calendar tables {tables}"),
    )
}

// 8 and 9. Desk-scale training, shared between the two criteria.

const DESK_SEEDS: [u64; 3] = [1, 2, 3];

fn desk_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        base_lr: 2e-3,
        lr_decay: 0.85,
        train_stride: 3,
        val_stride: 4,
        epochs: 20,
        patience: 3,
        seed,
        ..TrainConfig::default()
    }
}

struct DeskRun {
    trained: TrainedModel,
    elapsed: Duration,
}

fn desk_run(variant: ModelVariant, seed: u64) -> Result<DeskRun> {
    let start = Instant::now();
    let trained = train_variant(desk_data(), variant, &ModelConfig::default(), &desk_train_config(seed))?;
    Ok(DeskRun { trained, elapsed: start.elapsed() })
}

/// State shared across criteria within one run.
#[derive(Default)]
struct Shared {
    informer: OnceCell<Result<DeskRun>>,
}

impl Shared {
    fn desk_informer(&self) -> &Result<DeskRun> {
        self.informer.get_or_init(|| desk_run(ModelVariant::Informer, DESK_SEEDS[0]))
    }
}

fn raw_mape(report: &MetricsReport) -> f64 {
    report.rows.iter().find(|r| r.scale == Scale::Raw).map_or(f64::NAN, |r| r.mape)
}

fn criterion_8(shared: &Shared) -> Outcome {
    let data = desk_data();
    let run = shared.desk_informer().as_ref().map_err(|e| format!("error: {e}"))?;
    let model = &run.trained.model;
    let geometry = model.config.geometry();
    let train_w = make_windows(&data.train, &geometry, 1).map_err(fail)?;
    let train_mse = evaluate_loss(model, &train_w, 64, 0).map_err(fail)?;
    let model_mape = raw_mape(&evaluate_on(model, data, &geometry, 1, "Informer").map_err(fail)?);
    let persistence = raw_mape(&evaluate_on(&Persistence, data, &geometry, 1, "Persistence").map_err(fail)?);
    let epochs = run.trained.history.epochs.len();
    let secs = run.elapsed.as_secs_f64();
    check(
        train_mse < 1e-2 && epochs <= 20 && model_mape < persistence && secs < 600.0,
        format!(
            "train MSE {train_mse:.5} (< 1e-2) after {epochs} epochs, test MAPE {model_mape:.4} vs persistence \
             {persistence:.4}, {secs:.0}s"
        ),
    )
}

fn criterion_9(shared: &Shared) -> Outcome {
    let start = Instant::now();
    let informer = shared.desk_informer().as_ref().map_err(|e| format!("error: {e}"))?;
    let mut runs = Vec::new();
    for (i, &seed) in DESK_SEEDS.iter().enumerate() {
        let dagger = desk_run(ModelVariant::InformerDagger, seed).map_err(fail)?;
        let full = if i == 0 { None } else { Some(desk_run(ModelVariant::Informer, seed).map_err(fail)?) };
        runs.push((full, dagger));
    }
    let pairs: Vec<(&TrainedModel, &TrainedModel)> = runs
        .iter()
        .map(|(full, dagger)| (full.as_ref().map_or(&informer.trained, |r| &r.trained), &dagger.trained))
        .collect();
    let result = ablation_from_pairs(desk_data(), &pairs, 1).map_err(fail)?;
    let a = result.median_mape(ModelVariant::Informer, Scale::Raw).unwrap_or(f64::NAN);
    let b = result.median_mape(ModelVariant::InformerDagger, Scale::Raw).unwrap_or(f64::NAN);
    let secs = (start.elapsed() + informer.elapsed).as_secs_f64();
    let per_seed: Vec<String> = result
        .per_seed
        .iter()
        .map(|s| {
            let get = |v: ModelVariant| {
                let row = s.report.rows.iter().find(|r| r.variant == v.display_name() && r.scale == Scale::Raw);
                row.map_or(f64::NAN, |r| r.mape)
            };
            format!("{}: {:.4}/{:.4}", s.seed, get(ModelVariant::Informer), get(ModelVariant::InformerDagger))
        })
        .collect();
    check(
        a < b && secs < 1800.0,
        format!("median MAPE Informer {a:.4} vs Informer† {b:.4} (per seed {}), {secs:.0}s", per_seed.join(", ")),
    )
}

// 10. Metrics.

fn criterion_10(_: &Shared) -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-10;
    let m = |r: Result<f64>| r.unwrap_or(f64::NAN);
    let mse = mse_loss(&tensor(vec![1.0, 2.0], &[2]), &tensor(vec![0.0, 0.0], &[2])).map_err(fail)?.item();
    let hand = [
        close(m(mae(&[2.0, 4.0], &[1.0, 2.0])), 1.5),
        close(m(rmse(&[2.0, 4.0], &[1.0, 2.0])), 2.5f64.sqrt()),
        close(m(rmse(&[3.0], &[1.0])), 2.0),
        close(m(mape(&[110.0], &[100.0])), 10.0),
        close(m(mape(&[5.0, 6.0], &[5.0, 6.0])), 0.0),
        close(mse, 2.5),
        mape(&[1.0], &[0.0]).is_err(),
        mae(&[], &[]).is_err(),
    ];
    let mut r = rng(10);
    let mut jensen = 0;
    let mut scale_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(1..50);
        let p: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| r.random_range(0.5..100.0)).collect();
        if m(rmse(&p, &t)) >= m(mae(&p, &t)) * (1.0 - 1e-12) {
            jensen += 1;
        }
        let k = r.random_range(0.01..100.0);
        let (pk, tk): (Vec<f64>, Vec<f64>) = p.iter().zip(&t).map(|(a, b)| (a * k, b * k)).unzip();
        let base = m(mape(&p, &t));
        scale_err = scale_err.max((m(mape(&pk, &tk)) - base).abs() / base.max(1.0));
    }
    let hand_ok = hand.iter().filter(|&&b| b).count();
    check(
        hand_ok == hand.len() && jensen == 1000 && scale_err < 1e-10,
        format!("hand values {hand_ok}/{}, RMSE >= MAE {jensen}/1000, MAPE scale drift {scale_err:.1e}", hand.len()),
    )
}

// 11. Split sizes.

fn criterion_11(_: &Shared) -> Outcome {
    let s = split_sizes(65358, &SplitSpec::default()).map_err(fail)?;
    check(
        s.train == 45751 && s.val == 6536 && s.test.abs_diff(13071) <= 1 && s.total() == 65358,
        format!("{} / {} / {}", s.train, s.val, s.test),
    )
}

// 12. Checkpoints and transfer.

fn criterion_12(shared: &Shared) -> Outcome {
    let data = desk_data();
    let model = match shared.desk_informer() {
        Ok(run) => run.trained.model.clone(),
        Err(_) => Model::new(ModelVariant::Informer, &ModelConfig::default(), 12).map_err(fail)?,
    };
    let provenance = Provenance { dataset: data.id(), seed: 1, epoch: 1 };
    let bytes = encode_checkpoint(&model, &data.stats, &provenance).map_err(fail)?;
    let ck = decode_checkpoint(&bytes).map_err(fail)?;
    let again = encode_checkpoint(&ck.model, &ck.norm_stats, &ck.provenance).map_err(fail)?;
    let geometry = model.config.geometry();
    let batch = first_batch(data, &geometry, 3).map_err(fail)?;
    let (a, b) = (model.predict(&batch, 0).map_err(fail)?, ck.model.predict(&batch, 0).map_err(fail)?);
    let stable = bytes == again && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());

    let targets = [
        SpikeSeriesSpec { symbol: "OTHER".into(), base_price: 80.0, seed: 12, n_bars: 1500, ..Default::default() },
        SpikeSeriesSpec {
            symbol: "FIVE".into(),
            interval: BarInterval::FiveMinute,
            n_bars: 1500,
            bars_per_session: 60,
            spike_offset: 30,
            spike_width: 2,
            ..Default::default()
        },
    ];
    let mut shapes = Vec::new();
    for spec in &targets {
        let series = spike_series(spec).map_err(fail)?;
        let target = PreparedDataset::new(&series, &SplitSpec::default(), Some(ck.norm_stats.clone())).map_err(fail)?;
        let batch = first_batch(&target, &geometry, 4).map_err(fail)?;
        let out = informer::no_grad(|| ck.model.forward(&batch, &mut ForwardCtx::eval(0))).map_err(fail)?;
        shapes.push((series.id(), out.shape()[1..].to_vec()));
    }
    let shapes_ok = shapes.iter().all(|(_, s)| s == &[24, 1]);
    check(
        stable && shapes_ok,
        format!("round trip bitwise: {stable} ({} bytes), per-window output shapes {shapes:?}", bytes.len()),
    )
}

// 13. Training determinism through the train command.

const TRAIN_TOML: &str = r#"
[model]
d_model = 16
n_heads = 2
e_layers = 2
d_layers = 1
d_ff = 32
seq_len = 32
label_len = 16
pred_len = 8

[train]
epochs = 3
train_stride = 4
val_stride = 8
"#;

fn train_once(dir: &Path, manifest: &Path, out: &str) -> std::result::Result<(TrainHistory, Vec<u8>), String> {
    let flags = Flags {
        manifest: Some(manifest.to_path_buf()),
        out: Some(dir.join(out)),
        seed: Some(13),
        ..Flags::default()
    };
    let cfg = RunConfig::from_toml(TRAIN_TOML).and_then(|c| c.resolve("train", &flags)).map_err(fail)?;
    dispatch("train", &cfg).map_err(fail)?;
    let history = fs::read_to_string(dir.join(out).join("history.json")).map_err(|e| e.to_string())?;
    let history: TrainHistory = serde_json::from_str(&history).map_err(|e| e.to_string())?;
    let ckpt = fs::read(dir.join(out).join("checkpoint.ckpt")).map_err(|e| e.to_string())?;
    Ok((history, ckpt))
}

fn criterion_13(_: &Shared) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let series = spike_series(&SpikeSeriesSpec { n_bars: 1500, ..Default::default() }).map_err(fail)?;
    let csv = dir.path().join("syn.csv");
    series.write_csv(&csv).map_err(fail)?;
    let entry = DatasetEntry { symbol: series.symbol.clone(), bar_interval: series.interval, path: csv, expected_rows: None };
    let manifest = Manifest { datasets: vec![entry] };
    let manifest_path = dir.path().join("manifest.toml");
    manifest.save(&manifest_path).map_err(fail)?;
    let (h1, c1) = train_once(dir.path(), &manifest_path, "a")?;
    let (h2, c2) = train_once(dir.path(), &manifest_path, "b")?;
    check(
        h1 == h2 && c1 == c2 && !h1.epochs.is_empty(),
        format!("{} epochs, histories equal: {}, checkpoints equal: {} ({} bytes)", h1.epochs.len(), h1 == h2, c1 == c2, c1.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("gradient correctness", criterion_1),
        ("probsparse degeneracy", criterion_2),
        ("sparsity measurement invariants", criterion_3),
        ("distilling schedule", criterion_4),
        ("one-shot decoding", criterion_5),
        ("dot-product growth", criterion_6),
        ("time-stamp ablation identity", criterion_7),
        ("desk-scale learning", criterion_8),
        ("directional ablation", criterion_9),
        ("metrics", criterion_10),
        ("split sizes", criterion_11),
        ("checkpoint and transfer", criterion_12),
        ("training determinism", criterion_13),
    ];
    let shared = Shared::default();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run(&shared);
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
