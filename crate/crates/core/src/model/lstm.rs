use rand::Rng;

use super::{ForwardCtx, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{join, Linear, Parameterized};
use crate::tensor::Tensor;

/// Single-layer LSTM over the encoder window; a linear head maps the final
/// hidden state to all `L_y` outputs at once.
#[derive(Debug, Clone)]
pub struct LstmBaseline {
    /// Input to gates `[i, f, g, o]`.
    pub w_ih: Linear,
    pub w_hh: Linear,
    pub head: Linear,
    pub hidden: usize,
    pub pred_len: usize,
    pub c_out: usize,
}

impl LstmBaseline {
    pub fn new(cfg: &ModelConfig, rng: &mut impl Rng) -> Self {
        let h = cfg.d_model;
        LstmBaseline {
            w_ih: Linear::new(cfg.enc_in, 4 * h, true, rng),
            w_hh: Linear::new(h, 4 * h, false, rng),
            head: Linear::new(h, cfg.pred_len * cfg.c_out, true, rng),
            hidden: h,
            pred_len: cfg.pred_len,
            c_out: cfg.c_out,
        }
    }

    /// `[B, L, enc_in] -> [B, L_y, c_out]`
    pub fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx) -> Result<Tensor> {
        if x.rank() != 3 {
            return Err(Error::dim("lstm", x.shape(), &[0, 0, self.w_ih.in_dim()]));
        }
        let (b, l) = (x.shape()[0], x.shape()[1]);
        let h4 = 4 * self.hidden;
        let xi = self.w_ih.forward(x)?;
        let mut h = Tensor::zeros(&[b, self.hidden]);
        let mut c = Tensor::zeros(&[b, self.hidden]);
        for t in 0..l {
            let gates = xi.narrow(1, t, 1)?.reshape(&[b, h4])?.add(&self.w_hh.forward(&h)?)?;
            let gate = |k: usize| gates.narrow(1, k * self.hidden, self.hidden);
            let i = gate(0)?.sigmoid();
            let f = gate(1)?.sigmoid();
            let g = gate(2)?.tanh();
            let o = gate(3)?.sigmoid();
            c = f.mul(&c)?.add(&i.mul(&g)?)?;
            h = o.mul(&c.tanh())?;
        }
        self.head.forward(&h)?.reshape(&[b, self.pred_len, self.c_out])
    }
}

impl Parameterized for LstmBaseline {
    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.w_ih.collect_params(&join(prefix, "w_ih"), out);
        self.w_hh.collect_params(&join(prefix, "w_hh"), out);
        self.head.collect_params(&join(prefix, "head"), out);
    }
}
