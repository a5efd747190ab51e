//! Fully connected ReLU network on a flat parameter vector, with Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Parameters are stored layer by layer: the `out x in` weight matrix in
/// row-major order followed by the `out` biases. Hidden layers use ReLU, the
/// output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations retained by a forward pass for backpropagation. `acts[0]` is
/// the input, `acts[l]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(invalid("network needs at least two non-empty layers"));
        }
        Ok(Mlp { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = libm::sqrt(6.0 / n_in as f64);
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.random_range(-bound..bound);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(invalid("parameter count does not match layer sizes"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(invalid("input dimension mismatch"));
        }
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out = vec![0.0; n_out];
            for (j, o) in out.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = b[j];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                *o = if l + 1 < layers { z.max(0.0) } else { z };
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        if acts[layers].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        Ok(ForwardCache { acts })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.acts.pop().unwrap_or_default())
    }

    /// Accumulates into `grad` the gradient of a scalar loss whose derivative
    /// with respect to the network output is `grad_out`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + j * n_in..off + (j + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
                grad[off + n_in * n_out + j] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // ReLU derivative, taken as zero at the kink.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }

    pub fn distance(&self, other: &Mlp) -> f64 {
        libm::sqrt(self.params.iter().zip(&other.params).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

/// Smooth-L1 (Huber, unit threshold) loss of one residual.
pub fn smooth_l1(residual: f64) -> f64 {
    let a = residual.abs();
    if a < 1.0 {
        0.5 * residual * residual
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(residual: f64) -> f64 {
    residual.clamp(-1.0, 1.0)
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grad.iter().map(|g| g * g).sum());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}
