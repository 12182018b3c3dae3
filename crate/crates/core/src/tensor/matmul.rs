//! Batched matrix products. The inner kernel is `matrixmultiply::dgemm`;
//! transposes are expressed through strides, never materialized.

use super::{numel, Tensor};
use crate::error::{Error, Result};

/// Row-major matrix view: `trans` reinterprets a stored `cols x rows`
/// matrix as its transpose.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    trans: bool,
}

impl View<'_> {
    fn strides(&self) -> (isize, isize) {
        if self.trans {
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c (+)= a * b`.
fn gemm_view(a: View<'_>, b: View<'_>, c: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.cols, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the views cover exactly m*k, k*n and m*n contiguous elements
    // addressed by the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major `c[m,n] (+)= op(a)[m,k] * op(b)[k,n]`, where `op` transposes
/// a stored `[k,m]` (resp. `[n,k]`) operand when the flag is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    let av = View { data: a, rows: m, cols: k, trans: trans_a };
    let bv = View { data: b, rows: k, cols: n, trans: trans_b };
    gemm_view(av, bv, c, accumulate);
}

/// For each output batch index, the batch offsets of the two operands.
fn batch_pairs(op: &'static str, a: &[usize], b: &[usize]) -> Result<(Vec<usize>, Vec<(usize, usize)>)> {
    let rank = a.len().max(b.len());
    let pad = |s: &[usize]| {
        let mut v = vec![1; rank - s.len()];
        v.extend_from_slice(s);
        v
    };
    let (pa, pb) = (pad(a), pad(b));
    let mut out = Vec::with_capacity(rank);
    for (&x, &y) in pa.iter().zip(&pb) {
        if x == y || y == 1 {
            out.push(x);
        } else if x == 1 {
            out.push(y);
        } else {
            return Err(Error::dim(op, a, b));
        }
    }
    let total = numel(&out);
    let mut pairs = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    for _ in 0..total {
        let (mut oa, mut ob) = (0, 0);
        for d in 0..rank {
            oa = oa * pa[d] + if pa[d] == 1 { 0 } else { idx[d] };
            ob = ob * pb[d] + if pb[d] == 1 { 0 } else { idx[d] };
        }
        pairs.push((oa, ob));
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok((out, pairs))
}

impl Tensor {
    /// `self[.., m, k] x other[.., k, n] -> [.., m, n]` with leading batch
    /// dimensions broadcast.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.matmul_impl(other, false)
    }

    /// `self[.., m, k] x other[.., n, k]^T -> [.., m, n]`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        self.matmul_impl(other, true)
    }

    fn matmul_impl(&self, other: &Tensor, trans_b: bool) -> Result<Tensor> {
        let op = "matmul";
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::dim(op, sa, sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = if trans_b {
            (sb[sb.len() - 1], sb[sb.len() - 2])
        } else {
            (sb[sb.len() - 2], sb[sb.len() - 1])
        };
        if k != kb {
            return Err(Error::dim(op, sa, sb));
        }
        let (batch, pairs) = batch_pairs(op, &sa[..sa.len() - 2], &sb[..sb.len() - 2])?;
        let mut shape = batch;
        shape.extend([m, n]);

        let (a_sz, b_sz, c_sz) = (m * k, k * n, m * n);
        let mut out = vec![0.0; pairs.len() * c_sz];
        {
            let a = self.data();
            let b = other.data();
            for (o, &(ia, ib)) in pairs.iter().enumerate() {
                let av = View { data: &a[ia * a_sz..(ia + 1) * a_sz], rows: m, cols: k, trans: false };
                let bv = View { data: &b[ib * b_sz..(ib + 1) * b_sz], rows: k, cols: n, trans: trans_b };
                gemm_view(av, bv, &mut out[o * c_sz..(o + 1) * c_sz], false);
            }
        }

        let (a_t, b_t) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            "matmul",
            out,
            shape,
            vec![self.clone(), other.clone()],
            move |g, _| {
                let a = a_t.data();
                let b = b_t.data();
                let mut ga = a_t.requires_grad().then(|| vec![0.0; a.len()]);
                let mut gb = b_t.requires_grad().then(|| vec![0.0; b.len()]);
                for (o, &(ia, ib)) in pairs.iter().enumerate() {
                    let gv = View { data: &g[o * c_sz..(o + 1) * c_sz], rows: m, cols: n, trans: false };
                    let a_blk = &a[ia * a_sz..(ia + 1) * a_sz];
                    let b_blk = &b[ib * b_sz..(ib + 1) * b_sz];
                    if let Some(ga) = ga.as_mut() {
                        // dA = G * B^T, where B is the effective k x n operand.
                        let bt = View { data: b_blk, rows: n, cols: k, trans: !trans_b };
                        gemm_view(gv, bt, &mut ga[ia * a_sz..(ia + 1) * a_sz], true);
                    }
                    if let Some(gb) = gb.as_mut() {
                        let dst = &mut gb[ib * b_sz..(ib + 1) * b_sz];
                        if trans_b {
                            // stored B is n x k: dB = G^T * A
                            let gt = View { data: gv.data, rows: n, cols: m, trans: true };
                            let av = View { data: a_blk, rows: m, cols: k, trans: false };
                            gemm_view(gt, av, dst, true);
                        } else {
                            let at = View { data: a_blk, rows: k, cols: m, trans: true };
                            gemm_view(at, gv, dst, true);
                        }
                    }
                }
                vec![ga, gb]
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: &[f64], shape: &[usize]) -> Tensor {
        Tensor::from_vec(data.to_vec(), shape).unwrap()
    }

    #[test]
    fn hand_computed_product() {
        let a = t(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        let b = t(&[1.0, 1.0], &[2, 1]);
        assert_eq!(a.matmul(&b).unwrap().to_vec(), vec![3.0, 7.0]);
    }

    #[test]
    fn identity_left() {
        let eye = t(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &[3, 3]);
        let a: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        let at = t(&a, &[3, 3]);
        assert_eq!(eye.matmul(&at).unwrap().to_vec(), a);
    }

    #[test]
    fn nt_matches_explicit_transpose() {
        let a = t(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = t(&[1.0, 0.0, 2.0, -1.0, 3.0, 1.0], &[2, 3]);
        let bt = b.transpose_last2();
        assert_eq!(a.matmul_nt(&b).unwrap().to_vec(), a.matmul(&bt).unwrap().to_vec());
    }

    #[test]
    fn batch_broadcast() {
        let a = t(&(0..12).map(|v| v as f64).collect::<Vec<_>>(), &[3, 2, 2]);
        let b = t(&[1.0, 0.0, 0.0, 1.0], &[2, 2]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[3, 2, 2]);
        assert_eq!(c.to_vec(), a.to_vec());
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = t(&[1.0; 6], &[2, 3]);
        let b = t(&[1.0; 4], &[2, 2]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }
}
