use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Temporal max-pooling over `[.., L, c]` with window 3, stride 2 and one
/// padding position on each side, giving `ceil(L / 2)` outputs. Padding
/// never wins the max. Gradients route to the first maximal position.
pub fn maxpool1d(x: &Tensor) -> Result<Tensor> {
    maxpool1d_with(x, 3, 2, 1)
}

pub fn pooled_len(len: usize, window: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - window) / stride + 1
}

pub(crate) fn maxpool1d_with(x: &Tensor, window: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::dim("maxpool1d", &shape, &[]));
    }
    let (len, ch) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if len + 2 * pad < window {
        return Err(Error::Contract(format!("maxpool1d: length {len} shorter than window")));
    }
    let out_len = pooled_len(len, window, stride, pad);
    let slices = x.numel() / (len * ch);

    let mut out = vec![f64::NEG_INFINITY; slices * out_len * ch];
    let mut arg = vec![0usize; out.len()];
    {
        let xd = x.data();
        for s in 0..slices {
            for t in 0..out_len {
                let start = (t * stride) as isize - pad as isize;
                let o_base = (s * out_len + t) * ch;
                for w in 0..window {
                    let pos = start + w as isize;
                    if pos < 0 || pos as usize >= len {
                        continue;
                    }
                    let i_base = (s * len + pos as usize) * ch;
                    for c in 0..ch {
                        let v = xd[i_base + c];
                        if v > out[o_base + c] {
                            out[o_base + c] = v;
                            arg[o_base + c] = i_base + c;
                        }
                    }
                }
            }
        }
    }
    let mut out_shape = shape.clone();
    let r = out_shape.len();
    out_shape[r - 2] = out_len;
    let total = x.numel();
    Ok(Tensor::from_op("maxpool1d", out, out_shape, vec![x.clone()], move |g, _| {
        let mut gx = vec![0.0; total];
        for (gi, &src) in g.iter().zip(&arg) {
            gx[src] += gi;
        }
        vec![Some(gx)]
    }))
}
