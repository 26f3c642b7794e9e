//! Central finite-difference checks of graph gradients.
//!
//! The scalar under test is `<c, f(x)>` with a random `c`. Because a network
//! with fixed ReLU masks is affine in any single parameter, central
//! differences are exact up to rounding unless the perturbation flips a
//! mask. Such entries are either skipped, or avoided altogether by freezing
//! the masks at their unperturbed pattern (the right choice for deep
//! networks, where almost any perturbation flips some unit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::Graph;
use super::{ParamStore, Tensor};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    /// `||g_fd - g||_2 / max(||g_fd||_2, ||g||_2)` over the checked entries.
    pub rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Entries sampled per tensor (all entries when the tensor is smaller).
    pub samples_per_tensor: usize,
    pub seed: u64,
    pub freeze_relu_masks: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            samples_per_tensor: 24,
            seed: 0,
            freeze_relu_masks: false,
        }
    }
}

fn rel_error(fd: &[f64], an: &[f64]) -> f64 {
    let diff = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(an.iter().map(|v| v * v).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn pick(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    rand::seq::index::sample(rng, n, k).into_vec()
}

/// Check every parameter tensor and the input gradient of `graph`.
pub fn check_graph(graph: &Graph, params: &ParamStore<f64>, x: &Tensor<f64>, cfg: GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = graph.forward(params, x.clone());
    let out = base.output();
    let c: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dout = Tensor { data: c.clone(), ..*out };
    let pattern = base.relu_pattern(graph);
    let mut grads = params.zeros_like();
    let dx = graph.backward(params, &base, dout, &mut grads)?;

    let objective = |p: &ParamStore<f64>, xin: &Tensor<f64>| {
        let acts = if cfg.freeze_relu_masks {
            graph.forward_frozen(p, xin.clone(), &base)
        } else {
            graph.forward(p, xin.clone())
        };
        if cfg.freeze_relu_masks {
            let v: f64 = acts.output().data.iter().zip(&c).map(|(a, b)| a * b).sum();
            return (v, true);
        }
        let v: f64 = acts.output().data.iter().zip(&c).map(|(a, b)| a * b).sum();
        (v, acts.relu_pattern(graph) == pattern)
    };

    let h = cfg.step;
    let mut report = GradCheckReport { tensors: Vec::new() };
    let mut work = params.clone();
    for t in 0..params.len() {
        let idx = pick(params.get(t).len(), cfg.samples_per_tensor, &mut rng);
        let (mut fd, mut an, mut skipped) = (Vec::new(), Vec::new(), 0);
        for &k in &idx {
            let orig = work.get(t)[k];
            work.get_mut(t)[k] = orig + h;
            let (up, ok_up) = objective(&work, x);
            work.get_mut(t)[k] = orig - h;
            let (down, ok_down) = objective(&work, x);
            work.get_mut(t)[k] = orig;
            if ok_up && ok_down {
                fd.push((up - down) / (2.0 * h));
                an.push(grads.get(t)[k]);
            } else {
                skipped += 1;
            }
        }
        report.tensors.push(TensorCheck {
            name: params.tensors[t].name.clone(),
            rel_error: rel_error(&fd, &an),
            checked: fd.len(),
            skipped,
        });
    }

    let idx = pick(x.len(), cfg.samples_per_tensor, &mut rng);
    let (mut fd, mut an, mut skipped) = (Vec::new(), Vec::new(), 0);
    let mut xw = x.clone();
    for &k in &idx {
        let orig = xw.data[k];
        xw.data[k] = orig + h;
        let (up, ok_up) = objective(params, &xw);
        xw.data[k] = orig - h;
        let (down, ok_down) = objective(params, &xw);
        xw.data[k] = orig;
        if ok_up && ok_down {
            fd.push((up - down) / (2.0 * h));
            an.push(dx.data[k]);
        } else {
            skipped += 1;
        }
    }
    report.tensors.push(TensorCheck {
        name: "input".into(),
        rel_error: rel_error(&fd, &an),
        checked: fd.len(),
        skipped,
    });
    Ok(report)
}

/// Fill every parameter (final layer and biases included) with `U(-scale, scale)`.
pub fn randomize(params: &mut ParamStore<f64>, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in &mut params.tensors {
        t.data.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
}

pub fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor {
        c,
        h,
        w,
        data: (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}
