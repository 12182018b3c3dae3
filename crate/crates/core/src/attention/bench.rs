use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    default_sample_count, full_attention, probsparse_attention, top_u_count, AttentionInputs, DotProductCounter,
    SparsityMode,
};
use crate::error::{Error, Result};
use crate::tensor::{no_grad, Tensor};

/// Dot products spent by each attention form at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub len: usize,
    pub u: usize,
    pub sample_count: usize,
    pub full: DotProductCounter,
    pub exact: DotProductCounter,
    pub sampled: DotProductCounter,
}

impl BenchRow {
    /// `L ln L`, the growth the sampled form should follow.
    pub fn l_ln_l(&self) -> f64 {
        self.len as f64 * (self.len as f64).ln()
    }
}

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::from_vec(data, shape).expect("shape matches data")
}

/// Runs full, exact ProbSparse and sampled ProbSparse self-attention on
/// random `[L, depth]` inputs for every length and tallies the products.
pub fn bench_attention(lengths: &[usize], depth: usize, factor: f64, seed: u64) -> Result<Vec<BenchRow>> {
    if lengths.is_empty() || lengths.contains(&0) || depth == 0 {
        return Err(Error::Config("benchmark lengths and depth must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    no_grad(|| {
        lengths
            .iter()
            .map(|&len| {
                let x = randn(&[len, depth], &mut rng);
                let inputs = AttentionInputs::new(x.clone(), x.clone(), x, false)?;
                let u = top_u_count(factor, len);
                let sample_count = default_sample_count(factor, len);
                let mut full = DotProductCounter::default();
                full_attention(&inputs, &mut full)?;
                let mut exact = DotProductCounter::default();
                probsparse_attention(&inputs, u, SparsityMode::Exact, sample_count, &mut rng, &mut exact)?;
                let mut sampled = DotProductCounter::default();
                probsparse_attention(&inputs, u, SparsityMode::Sampled, sample_count, &mut rng, &mut sampled)?;
                Ok(BenchRow { len, u, sample_count, full, exact, sampled })
            })
            .collect()
    })
}
