//! Reshaping, slicing, concatenation and row gather/scatter.

use super::{numel, Tensor};
use crate::error::{Error, Result};

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Row indices chosen independently in every `[.., L, d]` slice of a
/// tensor: `indices[s * per_slice + r]` is the r-th chosen row of slice `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIndex {
    pub per_slice: usize,
    pub indices: Vec<usize>,
}

impl RowIndex {
    pub fn slices(&self) -> usize {
        self.indices.len() / self.per_slice.max(1)
    }

    pub fn slice(&self, s: usize) -> &[usize] {
        &self.indices[s * self.per_slice..(s + 1) * self.per_slice]
    }
}

/// (slices, rows, width) of a rank >= 2 tensor.
fn row_geometry(op: &'static str, shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::dim(op, shape, &[]));
    }
    let r = shape.len();
    Ok((numel(&shape[..r - 2]), shape[r - 2], shape[r - 1]))
}

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() || shape.contains(&0) {
            return Err(Error::dim("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            "reshape",
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            |g, _| vec![Some(g.to_vec())],
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::dim("permute", self.shape(), axes));
        }
        let in_shape = self.shape().to_vec();
        let in_strides = strides(&in_shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let n = self.numel();

        // map[out_linear] = in_linear
        let mut map = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        for _ in 0..n {
            map.push(idx.iter().zip(axes).map(|(&i, &a)| i * in_strides[a]).sum::<usize>());
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < out_shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let data = {
            let x = self.data();
            map.iter().map(|&i| x[i]).collect()
        };
        Ok(Tensor::from_op("permute", data, out_shape, vec![self.clone()], move |g, _| {
            let mut gx = vec![0.0; g.len()];
            for (o, &i) in map.iter().enumerate() {
                gx[i] = g[o];
            }
            vec![Some(gx)]
        }))
    }

    pub fn transpose_last2(&self) -> Tensor {
        let r = self.rank();
        assert!(r >= 2, "transpose_last2 on rank {r}");
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 2, r - 1);
        self.permute(&axes).expect("valid permutation")
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::Contract(format!(
                "narrow({axis}, {start}, {len}) out of range for shape {shape:?}"
            )));
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let full = shape[axis];
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let data = {
            let x = self.data();
            let mut d = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * full + start) * inner;
                d.extend_from_slice(&x[base..base + len * inner]);
            }
            d
        };
        let total = self.numel();
        Ok(Tensor::from_op("narrow", data, out_shape, vec![self.clone()], move |g, _| {
            let mut gx = vec![0.0; total];
            for o in 0..outer {
                let base = (o * full + start) * inner;
                gx[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(gx)]
        }))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = first.shape().to_vec();
        if axis >= base.len() {
            return Err(Error::dim("concat", &base, &[axis]));
        }
        for p in parts {
            let s = p.shape();
            if s.len() != base.len()
                || s.iter().zip(&base).enumerate().any(|(d, (a, b))| d != axis && a != b)
            {
                return Err(Error::dim("concat", &base, s));
            }
        }
        let outer = numel(&base[..axis]);
        let inner = numel(&base[axis + 1..]);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total_len: usize = lens.iter().sum();
        let mut out_shape = base.clone();
        out_shape[axis] = total_len;

        let mut data = Vec::with_capacity(outer * total_len * inner);
        {
            let views: Vec<_> = parts.iter().map(|p| p.data()).collect();
            for o in 0..outer {
                for (v, &l) in views.iter().zip(&lens) {
                    data.extend_from_slice(&v[o * l * inner..(o + 1) * l * inner]);
                }
            }
        }
        let flags: Vec<bool> = parts.iter().map(Tensor::requires_grad).collect();
        Ok(Tensor::from_op("concat", data, out_shape, parts.to_vec(), move |g, _| {
            let mut grads: Vec<Option<Vec<f64>>> = lens
                .iter()
                .zip(&flags)
                .map(|(&l, &f)| f.then(|| Vec::with_capacity(outer * l * inner)))
                .collect();
            let mut off = 0;
            for _ in 0..outer {
                for (gp, &l) in grads.iter_mut().zip(&lens) {
                    if let Some(gp) = gp {
                        gp.extend_from_slice(&g[off..off + l * inner]);
                    }
                    off += l * inner;
                }
            }
            grads
        }))
    }

    /// Gathers rows `idx` from every `[L, d]` slice, giving `[.., u, d]`.
    pub fn index_select_rows(&self, idx: &RowIndex) -> Result<Tensor> {
        let (slices, rows, width) = row_geometry("index_select_rows", self.shape())?;
        check_index(idx, slices, rows)?;
        let u = idx.per_slice;
        let data = {
            let x = self.data();
            let mut d = Vec::with_capacity(slices * u * width);
            for s in 0..slices {
                for &r in idx.slice(s) {
                    let at = (s * rows + r) * width;
                    d.extend_from_slice(&x[at..at + width]);
                }
            }
            d
        };
        let mut shape = self.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = u;
        let idx = idx.clone();
        let total = self.numel();
        Ok(Tensor::from_op("index_select_rows", data, shape, vec![self.clone()], move |g, _| {
            let mut gx = vec![0.0; total];
            for s in 0..slices {
                for (k, &r) in idx.slice(s).iter().enumerate() {
                    let at = (s * rows + r) * width;
                    let from = (s * u + k) * width;
                    gx[at..at + width]
                        .iter_mut()
                        .zip(&g[from..from + width])
                        .for_each(|(a, b)| *a += b);
                }
            }
            vec![Some(gx)]
        }))
    }

    /// Copy of `self` whose rows `idx` (per slice) are replaced by `rows`.
    /// Indices within a slice must be distinct.
    pub fn scatter_rows(&self, rows: &Tensor, idx: &RowIndex) -> Result<Tensor> {
        let (slices, l, width) = row_geometry("scatter_rows", self.shape())?;
        let (r_slices, u, r_width) = row_geometry("scatter_rows", rows.shape())?;
        if r_slices != slices || r_width != width || u != idx.per_slice {
            return Err(Error::dim("scatter_rows", self.shape(), rows.shape()));
        }
        check_index(idx, slices, l)?;
        let mut data = self.to_vec();
        {
            let src = rows.data();
            for s in 0..slices {
                for (k, &r) in idx.slice(s).iter().enumerate() {
                    let at = (s * l + r) * width;
                    let from = (s * u + k) * width;
                    data[at..at + width].copy_from_slice(&src[from..from + width]);
                }
            }
        }
        let idx = idx.clone();
        let (base_req, rows_req) = (self.requires_grad(), rows.requires_grad());
        Ok(Tensor::from_op(
            "scatter_rows",
            data,
            self.shape().to_vec(),
            vec![self.clone(), rows.clone()],
            move |g, _| {
                let mut g_base = base_req.then(|| g.to_vec());
                let mut g_rows = rows_req.then(|| vec![0.0; slices * u * width]);
                for s in 0..slices {
                    for (k, &r) in idx.slice(s).iter().enumerate() {
                        let at = (s * l + r) * width;
                        let from = (s * u + k) * width;
                        if let Some(gr) = g_rows.as_mut() {
                            gr[from..from + width].copy_from_slice(&g[at..at + width]);
                        }
                        if let Some(gb) = g_base.as_mut() {
                            gb[at..at + width].iter_mut().for_each(|v| *v = 0.0);
                        }
                    }
                }
                vec![g_base, g_rows]
            },
        ))
    }

    /// Embedding lookup: `self` is a `[vocab, d]` table; the result has
    /// shape `index_shape + [d]`.
    pub fn gather_table(&self, indices: &[usize], index_shape: &[usize]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 || numel(index_shape) != indices.len() {
            return Err(Error::dim("gather_table", s, index_shape));
        }
        let (vocab, width) = (s[0], s[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(Error::Contract(format!(
                "embedding index {bad} outside table of {vocab} rows"
            )));
        }
        let data = {
            let t = self.data();
            let mut d = Vec::with_capacity(indices.len() * width);
            for &i in indices {
                d.extend_from_slice(&t[i * width..(i + 1) * width]);
            }
            d
        };
        let mut shape = index_shape.to_vec();
        shape.push(width);
        let indices = indices.to_vec();
        Ok(Tensor::from_op("gather_table", data, shape, vec![self.clone()], move |g, _| {
            let mut gt = vec![0.0; vocab * width];
            for (k, &i) in indices.iter().enumerate() {
                gt[i * width..(i + 1) * width]
                    .iter_mut()
                    .zip(&g[k * width..(k + 1) * width])
                    .for_each(|(a, b)| *a += b);
            }
            vec![Some(gt)]
        }))
    }
}

fn check_index(idx: &RowIndex, slices: usize, rows: usize) -> Result<()> {
    if idx.per_slice == 0 || idx.indices.len() != slices * idx.per_slice {
        return Err(Error::Contract(format!(
            "row index has {} entries, expected {} slices x {}",
            idx.indices.len(),
            slices,
            idx.per_slice
        )));
    }
    if let Some(&bad) = idx.indices.iter().find(|&&r| r >= rows) {
        return Err(Error::Contract(format!("row {bad} out of range for {rows} rows")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(shape: &[usize]) -> Tensor {
        Tensor::from_vec((0..numel(shape)).map(|v| v as f64).collect(), shape).unwrap()
    }

    #[test]
    fn permute_swaps_axes() {
        let x = seq(&[2, 3]);
        let y = x.permute(&[1, 0]).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.to_vec(), vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert!(x.permute(&[0, 0]).is_err());
    }

    #[test]
    fn narrow_and_concat_invert() {
        let x = seq(&[2, 5, 3]);
        let a = x.narrow(1, 0, 2).unwrap();
        let b = x.narrow(1, 2, 3).unwrap();
        let y = Tensor::concat(&[a, b], 1).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
        assert!(x.narrow(1, 4, 2).is_err());
    }

    #[test]
    fn select_then_scatter_roundtrip() {
        let x = seq(&[2, 4, 2]);
        let idx = RowIndex { per_slice: 2, indices: vec![3, 1, 0, 2] };
        let rows = x.index_select_rows(&idx).unwrap();
        assert_eq!(rows.to_vec(), vec![6.0, 7.0, 2.0, 3.0, 8.0, 9.0, 12.0, 13.0]);
        let zeros = Tensor::zeros(&[2, 4, 2]);
        let back = zeros.scatter_rows(&rows, &idx).unwrap().to_vec();
        assert_eq!(&back[2..4], &[2.0, 3.0]);
        assert_eq!(&back[0..2], &[0.0, 0.0]);
    }

    #[test]
    fn gather_table_accumulates_repeated_rows() {
        let table = Tensor::parameter(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        let out = table.gather_table(&[1, 1, 0], &[3]).unwrap();
        assert_eq!(out.to_vec(), vec![3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        out.sum_all().backward().unwrap();
        assert_eq!(table.grad().unwrap(), vec![1.0, 1.0, 2.0, 2.0]);
        assert!(table.gather_table(&[2], &[1]).is_err());
    }
}
