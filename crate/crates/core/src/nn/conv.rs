use rand::Rng;

use super::{join, uniform_param, Parameterized};
use crate::error::{Error, Result};
use crate::tensor::matmul::gemm;
use crate::tensor::Tensor;

/// Temporal convolution over `[.., L, c_in]` with zero "same" padding and
/// stride 1, so the output keeps length `L`.
///
/// The weight is stored tap-major as `[kernel, c_in, c_out]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Conv1d {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, bias: bool, rng: &mut impl Rng) -> Self {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        let bound = 1.0 / ((kernel * c_in) as f64).sqrt();
        Conv1d {
            weight: uniform_param(&[kernel, c_in, c_out], bound, rng),
            bias: bias.then(|| uniform_param(&[c_out], bound, rng)),
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        let s = weight.shape();
        if s.len() != 3 || s[0].is_multiple_of(2) {
            return Err(Error::dim("conv1d", s, &[]));
        }
        if let Some(b) = &bias {
            if b.shape() != [s[2]] {
                return Err(Error::dim("conv1d", s, b.shape()));
            }
        }
        Ok(Conv1d { weight, bias })
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape().to_vec();
        if shape.len() < 2 || shape[shape.len() - 1] != self.c_in() {
            return Err(Error::dim("conv1d", &shape, self.weight.shape()));
        }
        let len = shape[shape.len() - 2];
        if len == 0 {
            return Err(Error::Contract("conv1d on an empty sequence".into()));
        }
        let slices = x.numel() / (len * self.c_in());
        let (k, ci, co) = (self.kernel(), self.c_in(), self.c_out());
        let pad = k / 2;

        // (tap, input row start, output row start, rows)
        let taps: Vec<(usize, usize, usize, usize)> = (0..k)
            .filter_map(|j| {
                let off = j as isize - pad as isize;
                let rows = len as isize - off.abs();
                (rows > 0).then(|| {
                    let (src, dst) = if off >= 0 { (off as usize, 0) } else { (0, (-off) as usize) };
                    (j, src, dst, rows as usize)
                })
            })
            .collect();

        let mut out = vec![0.0; slices * len * co];
        {
            let xd = x.data();
            let w = self.weight.data();
            for s in 0..slices {
                let xs = &xd[s * len * ci..(s + 1) * len * ci];
                let os = &mut out[s * len * co..(s + 1) * len * co];
                for &(j, src, dst, rows) in &taps {
                    gemm(
                        rows,
                        ci,
                        co,
                        &xs[src * ci..(src + rows) * ci],
                        false,
                        &w[j * ci * co..(j + 1) * ci * co],
                        false,
                        &mut os[dst * co..(dst + rows) * co],
                        true,
                    );
                }
            }
            if let Some(b) = &self.bias {
                let b = b.data();
                for row in out.chunks_exact_mut(co) {
                    row.iter_mut().zip(b.iter()).for_each(|(o, bi)| *o += bi);
                }
            }
        }

        let mut out_shape = shape.clone();
        *out_shape.last_mut().expect("rank >= 2") = co;
        let mut parents = vec![x.clone(), self.weight.clone()];
        if let Some(b) = &self.bias {
            parents.push(b.clone());
        }
        let (x_t, w_t, has_bias) = (x.clone(), self.weight.clone(), self.bias.is_some());
        Ok(Tensor::from_op("conv1d", out, out_shape, parents, move |g, _| {
            let xd = x_t.data();
            let w = w_t.data();
            let mut gx = x_t.requires_grad().then(|| vec![0.0; xd.len()]);
            let mut gw = w_t.requires_grad().then(|| vec![0.0; w.len()]);
            for s in 0..slices {
                let xs = &xd[s * len * ci..(s + 1) * len * ci];
                let gs = &g[s * len * co..(s + 1) * len * co];
                for &(j, src, dst, rows) in &taps {
                    let g_blk = &gs[dst * co..(dst + rows) * co];
                    let w_tap = &w[j * ci * co..(j + 1) * ci * co];
                    if let Some(gx) = gx.as_mut() {
                        let dst_x = &mut gx[s * len * ci + src * ci..s * len * ci + (src + rows) * ci];
                        gemm(rows, co, ci, g_blk, false, w_tap, true, dst_x, true);
                    }
                    if let Some(gw) = gw.as_mut() {
                        let x_blk = &xs[src * ci..(src + rows) * ci];
                        gemm(ci, rows, co, x_blk, true, g_blk, false, &mut gw[j * ci * co..(j + 1) * ci * co], true);
                    }
                }
            }
            let mut grads = vec![gx, gw];
            if has_bias {
                let mut gb = vec![0.0; co];
                for row in g.chunks_exact(co) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                grads.push(Some(gb));
            }
            grads
        }))
    }
}

impl Parameterized for Conv1d {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((join(prefix, "weight"), self.weight.clone()));
        if let Some(b) = &self.bias {
            out.push((join(prefix, "bias"), b.clone()));
        }
    }
}
