use serde::{Deserialize, Serialize};

use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// Sum of absolute differences and its subgradient (0 where the difference is exactly 0).
pub fn l1_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if !pred.same_shape(target) {
        return Err(Error::InvalidArgument(format!(
            "l1 loss shapes differ: {}x{}x{} vs {}x{}x{}",
            pred.c, pred.h, pred.w, target.c, target.h, target.w
        )));
    }
    let mut loss = 0.0;
    let grad = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d.abs().as_f64();
            if d > T::zero() {
                T::one()
            } else if d < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((loss, Tensor { data: grad, ..*pred }))
}

/// Mean over the batch of per-item L1 sums.
pub fn batch_l1_loss<T: Real>(preds: &[Tensor<T>], targets: &[Tensor<T>]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidArgument("batch loss needs matching non-empty lists".into()));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += l1_loss(p, t)?.0;
    }
    Ok(total / preds.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in `f64` whatever the parameter type.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Real>(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Apply one update. Parameters are untouched if any gradient is non-finite.
    pub fn step<T: Real>(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::InvalidArgument("optimizer state does not match parameters".into()));
        }
        for (p, g) in params.tensors.iter().zip(&grads.tensors) {
            if p.data.len() != g.data.len() {
                return Err(Error::SizeMismatch {
                    context: "adam gradient",
                    expected: p.data.len(),
                    actual: g.data.len(),
                });
            }
        }
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite(format!("gradient of `{name}`")));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, (w, &gk)) in p.data.iter_mut().zip(&g.data).enumerate() {
                let gk = gk.as_f64();
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let update = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                *w = T::from_f64(w.as_f64() - update);
            }
        }
        Ok(())
    }

    /// Moment buffers, for checkpointing.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn from_parts(config: AdamConfig, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::InvalidArgument("adam moment buffers disagree".into()));
        }
        Ok(Self { config, step, m, v })
    }
}
