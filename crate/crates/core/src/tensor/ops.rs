//! Elementwise arithmetic, reductions and softmax.

use super::{numel, Tensor};
use crate::error::{Error, Result};

/// Output shape for a binary op. Broadcasting is limited to leading
/// dimensions: one operand's shape must be a suffix of the other's, and the
/// shorter operand is tiled across the extra leading extents.
fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() >= b.len() && a.ends_with(b) {
        Ok(a.to_vec())
    } else if b.ends_with(a) {
        Ok(b.to_vec())
    } else {
        Err(Error::dim(op, a, b))
    }
}

/// Folds a gradient of `n_out` elements back onto an operand of `n_in`
/// elements that was tiled `n_out / n_in` times.
fn reduce_tiled(g: &[f64], n_in: usize) -> Vec<f64> {
    if g.len() == n_in {
        return g.to_vec();
    }
    let mut acc = vec![0.0; n_in];
    for chunk in g.chunks_exact(n_in) {
        acc.iter_mut().zip(chunk).for_each(|(a, c)| *a += c);
    }
    acc
}

impl Tensor {
    fn binary(
        &self,
        other: &Tensor,
        name: &'static str,
        f: fn(f64, f64) -> f64,
        da: fn(f64, f64) -> f64,
        db: fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let shape = broadcast_shape(name, self.shape(), other.shape())?;
        let n = numel(&shape);
        let (na, nb) = (self.numel(), other.numel());
        let data = {
            let a = self.data();
            let b = other.data();
            (0..n).map(|i| f(a[i % na], b[i % nb])).collect()
        };
        let (a_t, b_t) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            name,
            data,
            shape,
            vec![self.clone(), other.clone()],
            move |g, _| {
                let a = a_t.data();
                let b = b_t.data();
                let ga = a_t.requires_grad().then(|| {
                    let full: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * da(a[i % na], b[i % nb]))
                        .collect();
                    reduce_tiled(&full, na)
                });
                let gb = b_t.requires_grad().then(|| {
                    let full: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * db(a[i % na], b[i % nb]))
                        .collect();
                    reduce_tiled(&full, nb)
                });
                vec![ga, gb]
            },
        ))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        if let Some(i) = other.data().iter().position(|&v| v == 0.0) {
            return Err(Error::Numeric {
                op: "div",
                index: i,
                value: 0.0,
            });
        }
        self.binary(other, "div", |a, b| a / b, |_, b| 1.0 / b, |a, b| -a / (b * b))
    }

    /// Elementwise map whose derivative is expressed through the input `x`
    /// and the output `y`.
    fn unary(&self, name: &'static str, f: impl Fn(f64) -> f64, df: fn(f64, f64) -> f64) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&x| f(x)).collect();
        let src = self.clone();
        Tensor::from_op(
            name,
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, out| {
                let x = src.data();
                let gx = g
                    .iter()
                    .zip(x.iter().zip(out))
                    .map(|(gi, (&xi, &yi))| gi * df(xi, yi))
                    .collect();
                vec![Some(gx)]
            },
        )
    }

    pub fn neg(&self) -> Tensor {
        self.unary("neg", |x| -x, |_, _| -1.0)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&x| x * c).collect();
        Tensor::from_op(
            "scale",
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, _| vec![Some(g.iter().map(|v| v * c).collect())],
        )
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&x| x + c).collect();
        Tensor::from_op(
            "add_scalar",
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            |g, _| vec![Some(g.to_vec())],
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary("exp", f64::exp, |_, y| y)
    }

    pub fn ln(&self) -> Result<Tensor> {
        check_domain("ln", &self.data(), |x| x > 0.0)?;
        Ok(self.unary("ln", f64::ln, |x, _| 1.0 / x))
    }

    pub fn sqrt(&self) -> Result<Tensor> {
        check_domain("sqrt", &self.data(), |x| x > 0.0)?;
        Ok(self.unary("sqrt", f64::sqrt, |_, y| 0.5 / y))
    }

    pub fn square(&self) -> Tensor {
        self.unary("square", |x| x * x, |x, _| 2.0 * x)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(&self) -> Tensor {
        self.unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn relu(&self) -> Tensor {
        self.unary("relu", |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// ELU with alpha = 1.
    pub fn elu(&self) -> Tensor {
        self.unary(
            "elu",
            |x| if x >= 0.0 { x } else { x.exp_m1() },
            |x, y| if x >= 0.0 { 1.0 } else { y + 1.0 },
        )
    }

    /// GeLU, tanh approximation.
    pub fn gelu(&self) -> Tensor {
        self.unary("gelu", gelu_scalar, |x, _| gelu_grad_scalar(x))
    }

    pub fn sum_all(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op("sum", vec![s], Vec::new(), vec![self.clone()], move |g, _| {
            vec![Some(vec![g[0]; n])]
        })
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.numel();
        let s: f64 = self.data().iter().sum::<f64>() / n as f64;
        Tensor::from_op("mean", vec![s], Vec::new(), vec![self.clone()], move |g, _| {
            vec![Some(vec![g[0] / n as f64; n])]
        })
    }

    /// Softmax over the last axis, stabilized by subtracting each row's max.
    pub fn softmax_lastdim(&self) -> Result<Tensor> {
        let Some(&width) = self.shape().last() else {
            return Err(Error::Contract("softmax of a rank-0 tensor".into()));
        };
        check_domain("softmax", &self.data(), f64::is_finite)?;
        let mut out = self.to_vec();
        for row in out.chunks_exact_mut(width) {
            softmax_in_place(row);
        }
        Ok(Tensor::from_op(
            "softmax",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            move |g, y| {
                let mut gx = vec![0.0; g.len()];
                for ((gx_r, g_r), y_r) in gx
                    .chunks_exact_mut(width)
                    .zip(g.chunks_exact(width))
                    .zip(y.chunks_exact(width))
                {
                    let dot: f64 = g_r.iter().zip(y_r).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in gx_r.iter_mut().zip(g_r).zip(y_r) {
                        *o = yi * (gi - dot);
                    }
                }
                vec![Some(gx)]
            },
        ))
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn check_domain(op: &'static str, data: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
    match data.iter().position(|&x| !ok(x)) {
        Some(index) => Err(Error::Numeric {
            op,
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_K * x * x * x);
    let t = inner.tanh();
    let d_inner = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
}
