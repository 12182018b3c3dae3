use rand::Rng;

use super::{join, uniform_param, Parameterized};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Position-wise affine map `x W + b` over the last axis.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Linear {
            weight: uniform_param(&[in_dim, out_dim], bound, rng),
            bias: bias.then(|| uniform_param(&[out_dim], bound, rng)),
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        if weight.rank() != 2 {
            return Err(Error::dim("linear", weight.shape(), &[]));
        }
        if let Some(b) = &bias {
            if b.shape() != [weight.shape()[1]] {
                return Err(Error::dim("linear", weight.shape(), b.shape()));
            }
        }
        Ok(Linear { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        if shape.last() != Some(&self.in_dim()) {
            return Err(Error::dim("linear", shape, self.weight.shape()));
        }
        let rows = x.numel() / self.in_dim();
        let flat = if x.rank() == 2 { x.clone() } else { x.reshape(&[rows, self.in_dim()])? };
        let mut y = flat.matmul(&self.weight)?;
        if let Some(b) = &self.bias {
            y = y.add(b)?;
        }
        let mut out_shape = shape.to_vec();
        *out_shape.last_mut().expect("rank >= 1") = self.out_dim();
        if out_shape.as_slice() == y.shape() {
            Ok(y)
        } else {
            y.reshape(&out_shape)
        }
    }
}

impl Parameterized for Linear {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((join(prefix, "weight"), self.weight.clone()));
        if let Some(b) = &self.bias {
            out.push((join(prefix, "bias"), b.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let w = Tensor::parameter(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let b = Tensor::parameter(vec![0.0, 0.0], &[2]).unwrap();
        let lin = Linear::from_tensors(w, Some(b)).unwrap();
        let x = Tensor::from_vec(vec![1.5, -2.0, 3.0, 4.0, 0.5, 0.25], &[3, 2]).unwrap();
        assert_eq!(lin.forward(&x).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn ones_weights_sum_inputs() {
        let w = Tensor::parameter(vec![1.0, 1.0], &[2, 1]).unwrap();
        let lin = Linear::from_tensors(w, None).unwrap();
        let x = Tensor::from_vec(vec![3.0, 4.0], &[1, 1, 2]).unwrap();
        let y = lin.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.item(), 7.0);
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let w = Tensor::parameter(vec![1.0; 6], &[3, 2]).unwrap();
        let lin = Linear::from_tensors(w, None).unwrap();
        let x = Tensor::from_vec(vec![1.0; 4], &[2, 2]).unwrap();
        assert!(matches!(lin.forward(&x), Err(Error::Dimension { .. })));
    }
}
