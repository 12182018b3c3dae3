use rand::Rng;

use super::sparsity::{sparsity_measure, SparsityMode, SparsityScores};
use super::{AttentionInputs, DotProductCounter, MASK_VALUE};
use crate::error::{Error, Result};
use crate::tensor::{RowIndex, Tensor};

/// Output for queries that are not attended: the mean of all value rows
/// (`causal = false`, any `len_q`) or the running mean of value rows up to
/// each position (`causal = true`, `len_q == L_V`).
pub fn mean_fill(v: &Tensor, len_q: usize, causal: bool) -> Result<Tensor> {
    let shape = v.shape().to_vec();
    let r = shape.len();
    if r < 2 {
        return Err(Error::dim("mean_fill", &shape, &[]));
    }
    let (lv, dv) = (shape[r - 2], shape[r - 1]);
    if causal && len_q != lv {
        return Err(Error::Contract(format!("causal fill needs L_Q == L_V, got {len_q} and {lv}")));
    }
    let slices = v.numel() / (lv * dv);
    let mut out = vec![0.0; slices * len_q * dv];
    {
        let vd = v.data();
        for s in 0..slices {
            let vs = &vd[s * lv * dv..(s + 1) * lv * dv];
            let os = &mut out[s * len_q * dv..(s + 1) * len_q * dv];
            if causal {
                let mut acc = vec![0.0; dv];
                for i in 0..lv {
                    acc.iter_mut().zip(&vs[i * dv..(i + 1) * dv]).for_each(|(a, b)| *a += b);
                    let inv = 1.0 / (i + 1) as f64;
                    os[i * dv..(i + 1) * dv].iter_mut().zip(&acc).for_each(|(o, a)| *o = a * inv);
                }
            } else {
                let mut acc = vec![0.0; dv];
                for row in vs.chunks_exact(dv) {
                    acc.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                acc.iter_mut().for_each(|a| *a /= lv as f64);
                for row in os.chunks_exact_mut(dv) {
                    row.copy_from_slice(&acc);
                }
            }
        }
    }
    let mut out_shape = shape.clone();
    out_shape[r - 2] = len_q;
    Ok(Tensor::from_op("mean_fill", out, out_shape, vec![v.clone()], move |g, _| {
        let mut gv = vec![0.0; slices * lv * dv];
        for s in 0..slices {
            let gs = &g[s * len_q * dv..(s + 1) * len_q * dv];
            let dst = &mut gv[s * lv * dv..(s + 1) * lv * dv];
            if causal {
                // d v_j = sum_{i >= j} g_i / (i + 1)
                let mut acc = vec![0.0; dv];
                for i in (0..lv).rev() {
                    let inv = 1.0 / (i + 1) as f64;
                    acc.iter_mut().zip(&gs[i * dv..(i + 1) * dv]).for_each(|(a, b)| *a += b * inv);
                    dst[i * dv..(i + 1) * dv].copy_from_slice(&acc);
                }
            } else {
                let mut acc = vec![0.0; dv];
                for row in gs.chunks_exact(dv) {
                    acc.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                acc.iter_mut().for_each(|a| *a /= lv as f64);
                for row in dst.chunks_exact_mut(dv) {
                    row.copy_from_slice(&acc);
                }
            }
        }
        vec![Some(gv)]
    }))
}

/// Mask for selected queries: row `r` of slice `s` hides keys after the
/// selected query's original position.
fn selected_causal_mask(top: &RowIndex, lead: &[usize], len_k: usize) -> Result<Tensor> {
    let u = top.per_slice;
    let mut data = vec![0.0; top.indices.len() * len_k];
    for (row, &pos) in top.indices.iter().enumerate() {
        for j in (pos + 1)..len_k {
            data[row * len_k + j] = MASK_VALUE;
        }
    }
    let mut shape = lead.to_vec();
    shape.extend([u, len_k]);
    Tensor::from_vec(data, &shape)
}

/// ProbSparse attention. The `u` queries with the largest sparsity
/// measurement get full attention rows; all others receive [`mean_fill`].
///
/// `sample_count` is only read in sampled mode.
pub fn probsparse_attention<R: Rng + ?Sized>(
    inputs: &AttentionInputs,
    u: usize,
    mode: SparsityMode,
    sample_count: usize,
    rng: &mut R,
    counter: &mut DotProductCounter,
) -> Result<(Tensor, SparsityScores)> {
    let lq = inputs.len_q();
    if u == 0 || u > lq {
        return Err(Error::Contract(format!("u = {u} outside [1, {lq}]")));
    }
    let scores = sparsity_measure(inputs, mode, sample_count, u, rng, counter)?;
    let (lk, d) = (inputs.len_k(), inputs.depth());
    let lead = &inputs.q.shape()[..inputs.q.rank() - 2];

    let q_sel = inputs.q.index_select_rows(&scores.top)?;
    let mut s = q_sel.matmul_nt(&inputs.k)?.scale(1.0 / (d as f64).sqrt());
    if inputs.causal {
        s = s.add(&selected_causal_mask(&scores.top, lead, lk)?)?;
    }
    let attended = s.softmax_lastdim()?.matmul(&inputs.v)?;
    counter.attention += (inputs.slices() * u * lk) as u64;

    let fill = mean_fill(&inputs.v, lq, inputs.causal)?;
    let out = fill.scatter_rows(&attended, &scores.top)?;
    Ok((out, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::full_attention;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec((0..n).map(|_| rng.random_range(-1.5..1.5)).collect(), shape).unwrap()
    }

    #[test]
    fn mean_fill_values() {
        let v = Tensor::from_vec(vec![1.0, 10.0, 3.0, 20.0, 5.0, 30.0], &[3, 2]).unwrap();
        assert_eq!(mean_fill(&v, 2, false).unwrap().to_vec(), vec![3.0, 20.0, 3.0, 20.0]);
        assert_eq!(
            mean_fill(&v, 3, true).unwrap().to_vec(),
            vec![1.0, 10.0, 2.0, 15.0, 3.0, 20.0]
        );
        assert!(mean_fill(&v, 2, true).is_err());
    }

    #[test]
    fn full_selection_matches_full_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for causal in [false, true] {
            let q = random(&[2, 6, 4], &mut rng);
            let k = random(&[2, 6, 4], &mut rng);
            let v = random(&[2, 6, 3], &mut rng);
            let inp = AttentionInputs::new(q, k, v, causal).unwrap();
            let full = full_attention(&inp, &mut DotProductCounter::default()).unwrap().to_vec();
            let (sparse, _) =
                probsparse_attention(&inp, 6, SparsityMode::Exact, 0, &mut rng, &mut DotProductCounter::default()).unwrap();
            for (a, b) in full.iter().zip(sparse.to_vec()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lazy_rows_get_mean_of_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inp = AttentionInputs::new(random(&[8, 4], &mut rng), random(&[8, 4], &mut rng), random(&[8, 2], &mut rng), false).unwrap();
        let (out, scores) =
            probsparse_attention(&inp, 3, SparsityMode::Exact, 0, &mut rng, &mut DotProductCounter::default()).unwrap();
        let fill = mean_fill(&inp.v, 8, false).unwrap().to_vec();
        let out = out.to_vec();
        for i in 0..8 {
            if !scores.top.indices.contains(&i) {
                assert_eq!(&out[i * 2..i * 2 + 2], &fill[i * 2..i * 2 + 2]);
            }
        }
    }

    #[test]
    fn u_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inp = AttentionInputs::new(random(&[4, 2], &mut rng), random(&[4, 2], &mut rng), random(&[4, 2], &mut rng), false).unwrap();
        let mut c = DotProductCounter::default();
        assert!(probsparse_attention(&inp, 0, SparsityMode::Exact, 0, &mut rng, &mut c).is_err());
        assert!(probsparse_attention(&inp, 5, SparsityMode::Exact, 0, &mut rng, &mut c).is_err());
    }
}
