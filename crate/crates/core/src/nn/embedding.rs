use rand::Rng;

use super::{join, normal_param, Parameterized};
use crate::error::Result;
use crate::tensor::Tensor;

/// Learned lookup table `[vocab, width]`.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Tensor,
}

impl Embedding {
    pub fn new(vocab: usize, width: usize, std: f64, rng: &mut impl Rng) -> Self {
        Embedding { table: normal_param(&[vocab, width], std, rng) }
    }

    /// All-zero table; rows never looked up during training stay neutral.
    pub fn zeros(vocab: usize, width: usize) -> Self {
        let table = Tensor::parameter(vec![0.0; vocab * width], &[vocab, width]).expect("shape matches data");
        Embedding { table }
    }

    pub fn vocab(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn forward(&self, indices: &[usize], index_shape: &[usize]) -> Result<Tensor> {
        self.table.gather_table(indices, index_shape)
    }
}

impl Parameterized for Embedding {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((join(prefix, "table"), self.table.clone()));
    }
}

/// Fixed sinusoidal encoding for positions `offset..offset + len`:
/// `pe[p, 2i] = sin(p / 10000^(2i/d))`, `pe[p, 2i+1] = cos(..)`.
pub fn sinusoidal_encoding(offset: usize, len: usize, width: usize) -> Tensor {
    let mut data = vec![0.0; len * width];
    for (r, row) in data.chunks_exact_mut(width).enumerate() {
        let pos = (offset + r) as f64;
        for i in (0..width).step_by(2) {
            let freq = (-(i as f64) * (10000f64).ln() / width as f64).exp();
            row[i] = (pos * freq).sin();
            if i + 1 < width {
                row[i + 1] = (pos * freq).cos();
            }
        }
    }
    Tensor::from_vec(data, &[len, width]).expect("shape matches data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_rows_follow_offset() {
        let a = sinusoidal_encoding(0, 10, 8).to_vec();
        let b = sinusoidal_encoding(4, 3, 8).to_vec();
        assert_eq!(&a[4 * 8..7 * 8], &b[..]);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 1.0);
    }

    #[test]
    fn odd_width_is_supported() {
        let pe = sinusoidal_encoding(2, 2, 5);
        assert_eq!(pe.shape(), &[2, 5]);
        assert!(pe.to_vec().iter().all(|v| v.abs() <= 1.0));
    }
}
