use crate::tensor::Tensor;

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    params: Vec<Tensor>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: Vec<Tensor>) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect::<Vec<_>>();
        let v = m.clone();
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, params, m, v, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn zero_grad(&self) {
        self.params.iter().for_each(Tensor::zero_grad);
    }

    /// Applies one update from the accumulated gradients. Parameters without
    /// a gradient are treated as having a zero gradient.
    pub fn step(&mut self, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, m), v) in self.params.iter().zip(&mut self.m).zip(&mut self.v) {
            let grad = p.grad_ref();
            let mut data = p.data_mut();
            for i in 0..data.len() {
                let g = grad.as_ref().map_or(0.0, |g| g[i]);
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                data[i] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
