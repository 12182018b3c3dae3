//! Backward passes against central finite differences.

use informer::attention::{
    full_attention, probsparse_attention, AttentionInputs, AttentionKind, DotProductCounter, MultiHeadAttention,
    SparsityMode,
};
use informer::data::{make_windows, PreparedDataset, SplitSpec};
use informer::gradcheck::check_gradients;
use informer::model::{
    DecoderLayer, DistilLayer, EncoderLayer, FeedForward, ForwardCtx, LstmBaseline, Model, ModelConfig, ModelVariant,
};
use informer::nn::{activation, maxpool1d, Activation, Conv1d, Embedding, LayerNorm, Linear, Parameterized};
use informer::synthetic::{spike_series, SpikeSeriesSpec};
use informer::{Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const H: f64 = 1e-5;
const LAYER_TOL: f64 = 1e-4;
const MODEL_TOL: f64 = 1e-3;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..shape.iter().product()).map(|_| StandardNormal.sample(rng)).collect()
}

fn input(shape: &[usize], seed: u64) -> Tensor {
    Tensor::parameter(randn(shape, &mut rng(seed)), shape).unwrap()
}

/// Random fixed weighting, so the scalar loss depends on every output.
fn probe(out: &Tensor) -> Result<Tensor> {
    let w = Tensor::from_vec(randn(out.shape(), &mut rng(99)), out.shape())?;
    Ok(out.mul(&w)?.sum_all())
}

fn assert_grads(name: &str, params: Vec<Tensor>, f: impl Fn() -> Result<Tensor>, tol: f64) {
    let report = check_gradients(&params, || probe(&f()?), H, 24, 1).unwrap();
    assert!(report.checked > 0, "{name}: nothing checked");
    assert!(report.max_rel_err < tol, "{name}: max rel err {} at {:?}", report.max_rel_err, report.worst);
}

fn params_of(m: &impl Parameterized) -> Vec<Tensor> {
    m.named_params().into_iter().map(|(_, t)| t).collect()
}

#[test]
fn elementwise_and_reductions() {
    let x = input(&[3, 5], 1);
    let y = input(&[5], 2);
    let pos = Tensor::parameter(x.to_vec().iter().map(|v| v.abs() + 0.5).collect(), &[3, 5]).unwrap();
    assert_grads("add/mul/div", vec![x.clone(), y.clone(), pos.clone()], || x.add(&y)?.mul(&x)?.div(&pos), LAYER_TOL);
    assert_grads("exp/ln/sqrt", vec![pos.clone()], || pos.ln()?.add(&pos.sqrt()?)?.add(&pos.exp()), LAYER_TOL);
    assert_grads("tanh/sigmoid", vec![x.clone()], || x.tanh().mul(&x.sigmoid()), LAYER_TOL);
    for kind in [Activation::Gelu, Activation::Elu, Activation::Relu] {
        assert_grads("activation", vec![x.clone()], || Ok(activation(kind, &x)), LAYER_TOL);
    }
    assert_grads("softmax", vec![x.clone()], || x.softmax_lastdim(), LAYER_TOL);
    assert_grads("mean", vec![x.clone()], || Ok(x.square().mean_all()), LAYER_TOL);
}

#[test]
fn shape_ops_and_matmul() {
    let a = input(&[2, 3, 4], 3);
    let b = input(&[2, 4, 5], 4);
    let c = input(&[2, 5, 4], 5);
    assert_grads("matmul", vec![a.clone(), b.clone()], || a.matmul(&b), LAYER_TOL);
    assert_grads("matmul_nt", vec![a.clone(), c.clone()], || a.matmul_nt(&c), LAYER_TOL);
    assert_grads("permute/reshape", vec![a.clone()], || a.permute(&[0, 2, 1])?.reshape(&[8, 3]), LAYER_TOL);
    assert_grads("narrow/concat", vec![a.clone()], || Tensor::concat(&[a.narrow(1, 1, 2)?, a.clone()], 1), LAYER_TOL);
}

#[test]
fn layers() {
    let mut r = rng(7);
    let lin = Linear::new(4, 3, true, &mut r);
    let x = input(&[2, 5, 4], 8);
    let mut ps = params_of(&lin);
    ps.push(x.clone());
    assert_grads("linear", ps, || lin.forward(&x), LAYER_TOL);

    let conv = Conv1d::new(4, 6, 3, true, &mut r);
    let mut ps = params_of(&conv);
    ps.push(x.clone());
    assert_grads("conv1d", ps, || conv.forward(&x), LAYER_TOL);

    let norm = LayerNorm::new(4, 1e-5);
    let mut ps = params_of(&norm);
    ps.push(x.clone());
    assert_grads("layernorm", ps, || norm.forward(&x), LAYER_TOL);

    let emb = Embedding::new(7, 4, 1.0, &mut r);
    assert_grads("embedding", params_of(&emb), || emb.forward(&[0, 3, 3, 6, 1, 0], &[2, 3]), LAYER_TOL);

    let odd = input(&[2, 7, 4], 9);
    assert_grads("maxpool", vec![odd.clone()], || maxpool1d(&odd), LAYER_TOL);
}

#[test]
fn attention_forms() {
    for causal in [false, true] {
        let (q, k, v) = (input(&[2, 8, 4], 10), input(&[2, 8, 4], 11), input(&[2, 8, 4], 12));
        let ps = vec![q.clone(), k.clone(), v.clone()];
        let run_full = || {
            let inp = AttentionInputs::new(q.clone(), k.clone(), v.clone(), causal)?;
            full_attention(&inp, &mut DotProductCounter::default())
        };
        assert_grads("full attention", ps.clone(), run_full, LAYER_TOL);
        for u in [3, 8] {
            let run_sparse = || {
                let inp = AttentionInputs::new(q.clone(), k.clone(), v.clone(), causal)?;
                let mut c = DotProductCounter::default();
                Ok(probsparse_attention(&inp, u, SparsityMode::Exact, 8, &mut rng(0), &mut c)?.0)
            };
            assert_grads("probsparse attention", ps.clone(), run_sparse, LAYER_TOL);
        }
    }
}

#[test]
fn multi_head_blocks() {
    let mut r = rng(13);
    for kind in [AttentionKind::Full, AttentionKind::ProbSparse] {
        let mha = MultiHeadAttention::new(8, 2, kind, 1.0, SparsityMode::Exact, &mut r).unwrap();
        let x = input(&[2, 6, 8], 14);
        let m = input(&[2, 9, 8], 15);
        let mut ps = params_of(&mha);
        ps.extend([x.clone(), m.clone()]);
        assert_grads(
            "multi-head self",
            ps.clone(),
            || mha.forward(&x, &x, true, &mut rng(0), &mut DotProductCounter::default()),
            LAYER_TOL,
        );
        assert_grads(
            "multi-head cross",
            ps,
            || mha.forward(&x, &m, false, &mut rng(0), &mut DotProductCounter::default()),
            LAYER_TOL,
        );
    }
}

#[test]
fn encoder_and_decoder_layers() {
    let cfg = ModelConfig::tiny();
    let mut r = rng(16);
    let x = input(&[2, 8, cfg.d_model], 17);
    let mem = input(&[2, 4, cfg.d_model], 18);

    let ff = FeedForward::new(&cfg, &mut r);
    let mut ps = params_of(&ff);
    ps.push(x.clone());
    assert_grads("feed-forward", ps, || ff.forward(&x, 0.0, &mut ForwardCtx::eval(0)), LAYER_TOL);

    let enc = EncoderLayer::new(&cfg, &mut r).unwrap();
    let mut ps = params_of(&enc);
    ps.push(x.clone());
    assert_grads("encoder layer", ps, || enc.forward(&x, &mut ForwardCtx::eval(0)), LAYER_TOL);

    let distil = DistilLayer::new(cfg.d_model, &mut r);
    let mut ps = params_of(&distil);
    ps.push(x.clone());
    assert_grads("distil layer", ps, || distil.forward(&x), LAYER_TOL);

    let dec = DecoderLayer::new(&cfg, &mut r).unwrap();
    let mut ps = params_of(&dec);
    ps.extend([x.clone(), mem.clone()]);
    assert_grads("decoder layer", ps, || dec.forward(&x, &mem, &mut ForwardCtx::eval(0)), LAYER_TOL);

    let lstm = LstmBaseline::new(&cfg, &mut r);
    let seq = input(&[2, cfg.seq_len, cfg.enc_in], 19);
    let mut ps = params_of(&lstm);
    ps.push(seq.clone());
    assert_grads("lstm", ps, || lstm.forward(&seq, &mut ForwardCtx::eval(0)), LAYER_TOL);
}

#[test]
fn tiny_models_end_to_end() {
    let series = spike_series(&SpikeSeriesSpec { n_bars: 400, ..Default::default() }).unwrap();
    let data = PreparedDataset::new(&series, &SplitSpec::default(), None).unwrap();
    let cfg = ModelConfig::tiny();
    let windows = make_windows(&data.train, &cfg.geometry(), 37).unwrap();
    let batch = windows.batch(&windows.starts[..3]).unwrap();
    for v in ModelVariant::ALL {
        let model = Model::new(v, &cfg, 21).unwrap();
        // Calendar tables start at zero; give them values so their gradients matter.
        for (name, t) in model.named_params() {
            if name.contains("temporal") {
                let n = t.numel();
                t.data_mut().copy_from_slice(&randn(&[n], &mut rng(22)));
            }
        }
        let params = params_of(&model);
        assert_grads(v.as_str(), params, || model.forward(&batch, &mut ForwardCtx::eval(0)), MODEL_TOL);
    }
}
