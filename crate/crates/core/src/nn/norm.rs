use super::{join, Parameterized};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Layer normalization over the last axis with a learned affine.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(width: usize, eps: f64) -> Self {
        assert!(eps > 0.0, "layer norm epsilon must be positive");
        LayerNorm {
            gamma: Tensor::parameter(vec![1.0; width], &[width]).expect("shape"),
            beta: Tensor::parameter(vec![0.0; width], &[width]).expect("shape"),
            eps,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let width = self.gamma.numel();
        if x.shape().last() != Some(&width) {
            return Err(Error::dim("layer_norm", x.shape(), self.gamma.shape()));
        }
        let rows = x.numel() / width;
        let mut xhat = x.to_vec();
        let mut inv_std = vec![0.0; rows];
        for (r, row) in xhat.chunks_exact_mut(width).enumerate() {
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[r] = is;
            row.iter_mut().for_each(|v| *v = (*v - mean) * is);
        }
        let out: Vec<f64> = {
            let g = self.gamma.data();
            let b = self.beta.data();
            xhat.chunks_exact(width)
                .flat_map(|row| row.iter().zip(g.iter().zip(b.iter())).map(|(v, (gi, bi))| v * gi + bi))
                .collect()
        };
        let gamma = self.gamma.clone();
        let flags = (x.requires_grad(), self.gamma.requires_grad(), self.beta.requires_grad());
        Ok(Tensor::from_op(
            "layer_norm",
            out,
            x.shape().to_vec(),
            vec![x.clone(), self.gamma.clone(), self.beta.clone()],
            move |g, _| {
                let gam = gamma.data();
                let mut gx = flags.0.then(|| vec![0.0; g.len()]);
                let mut gg = vec![0.0; width];
                let mut gb = vec![0.0; width];
                for r in 0..rows {
                    let g_r = &g[r * width..(r + 1) * width];
                    let h_r = &xhat[r * width..(r + 1) * width];
                    for i in 0..width {
                        gg[i] += g_r[i] * h_r[i];
                        gb[i] += g_r[i];
                    }
                    if let Some(gx) = gx.as_mut() {
                        let dh: Vec<f64> = g_r.iter().zip(gam.iter()).map(|(a, b)| a * b).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = dh.iter().zip(h_r).map(|(a, b)| a * b).sum();
                        let k = inv_std[r] / width as f64;
                        for i in 0..width {
                            gx[r * width + i] = k * (width as f64 * dh[i] - sum_dh - h_r[i] * sum_dh_h);
                        }
                    }
                }
                vec![gx, flags.1.then_some(gg), flags.2.then_some(gb)]
            },
        ))
    }
}

impl Parameterized for LayerNorm {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((join(prefix, "gamma"), self.gamma.clone()));
        out.push((join(prefix, "beta"), self.beta.clone()));
    }
}
