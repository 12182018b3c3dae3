//! Query sparsity measurement: for query `q_i` with scaled scores
//! `s_ij = q_i . k_j / sqrt(d)`,
//!
//! ```text
//! M(q_i, K) = ln sum_j exp(s_ij) - (1 / L_K) sum_j s_ij
//! ```
//!
//! i.e. the log-sum-exp of the scores minus their arithmetic mean. By
//! Jensen, `M >= ln L_K` with equality iff all of the query's scores are
//! equal; peaked ("active") queries score high.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttentionInputs, DotProductCounter};
use crate::error::{Error, Result};
use crate::tensor::RowIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// Score each query against all `L_K` keys.
    Exact,
    /// Score each query against a uniform sample of keys (shared by all
    /// queries of a slice), drawn without replacement.
    Sampled,
}

#[derive(Debug, Clone)]
pub struct SparsityScores {
    /// `M` per query, `slices * L_Q` values.
    pub m: Vec<f64>,
    /// Selected query rows per slice, in descending-`M` order.
    pub top: RowIndex,
    pub u: usize,
    pub mode: SparsityMode,
    /// Keys scored per query.
    pub sample_count: usize,
}

/// `u = ceil(c ln L)` clamped to `[1, L]`.
pub fn top_u_count(factor: f64, len: usize) -> usize {
    let u = (factor * (len as f64).ln()).ceil();
    (u.max(1.0) as usize).min(len)
}

/// Keys sampled per query in sampled mode: `ceil(c ln L_K)` clamped to
/// `[1, L_K]`.
pub fn default_sample_count(factor: f64, len_k: usize) -> usize {
    top_u_count(factor, len_k)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ranks queries by `M` (descending, ties to the lower index) and keeps the
/// first `u` of every slice.
pub fn select_top_u(m: &[f64], len_q: usize, u: usize) -> RowIndex {
    let slices = m.len() / len_q;
    let mut indices = Vec::with_capacity(slices * u);
    for s in 0..slices {
        let ms = &m[s * len_q..(s + 1) * len_q];
        let mut order: Vec<usize> = (0..len_q).collect();
        order.sort_by(|&a, &b| ms[b].total_cmp(&ms[a]).then(a.cmp(&b)));
        indices.extend_from_slice(&order[..u]);
    }
    RowIndex { per_slice: u, indices }
}

/// Computes `M` for every query and selects the top `u`. In sampled mode
/// `sample_count` keys per slice are drawn without replacement.
pub fn sparsity_measure<R: Rng + ?Sized>(
    inputs: &AttentionInputs,
    mode: SparsityMode,
    sample_count: usize,
    u: usize,
    rng: &mut R,
    counter: &mut DotProductCounter,
) -> Result<SparsityScores> {
    inputs.validate()?;
    let (lq, lk, d) = (inputs.len_q(), inputs.len_k(), inputs.depth());
    if u == 0 || u > lq {
        return Err(Error::Contract(format!("u = {u} outside [1, {lq}]")));
    }
    let used = match mode {
        SparsityMode::Exact => lk,
        SparsityMode::Sampled => {
            if sample_count == 0 || sample_count > lk {
                return Err(Error::Contract(format!(
                    "sample_count = {sample_count} outside [1, L_K = {lk}]"
                )));
            }
            sample_count
        }
    };
    let scale = 1.0 / (d as f64).sqrt();
    let slices = inputs.slices();
    let q = inputs.q.data();
    let k = inputs.k.data();

    let mut m = Vec::with_capacity(slices * lq);
    let mut scores = vec![0.0; used];
    for s in 0..slices {
        let keys: Vec<usize> = match mode {
            SparsityMode::Exact => (0..lk).collect(),
            SparsityMode::Sampled => {
                let mut ks = sample(rng, lk, used).into_vec();
                ks.sort_unstable();
                ks
            }
        };
        let kb = &k[s * lk * d..(s + 1) * lk * d];
        for i in 0..lq {
            let qi = &q[(s * lq + i) * d..(s * lq + i + 1) * d];
            for (slot, &j) in scores.iter_mut().zip(&keys) {
                *slot = dot(qi, &kb[j * d..(j + 1) * d]) * scale;
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let mean = scores.iter().sum::<f64>() / used as f64;
            m.push(lse - mean);
        }
    }
    counter.measurement += (slices * lq * used) as u64;
    let top = select_top_u(&m, lq, u);
    Ok(SparsityScores { m, top, u, mode, sample_count: used })
}
