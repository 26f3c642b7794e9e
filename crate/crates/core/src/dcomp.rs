//! Iterative density compensation (Pipe-Menon).
//!
//! With `G` the plan's gridding interpolation matrix, `C = G G^T` maps sample
//! weights to their kernel-smoothed density at the samples. The iteration
//! `w <- w / (C w)` starts from `w = 1` and seeks `C w = 1`. No FFT or
//! deapodization is involved.

use std::path::Path;

use crate::error::{ensure_len, Error, Result};
use crate::nufft::NufftPlan;
use crate::rawio;

pub const DEFAULT_MAX_ITERS: usize = 20;
pub const DEFAULT_TOL: f64 = 1e-2;
/// Floor applied to `C w` before dividing.
pub const DENSITY_FLOOR: f64 = 1e-14;

/// Diagonal of the density compensation matrix, one non-negative weight per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DcWeights {
    weights: Vec<f64>,
    /// `||C w - 1||_inf` observed before each update (last entry is for the returned weights).
    pub residual_history: Vec<f64>,
    /// Some entry of `C w` fell below [`DENSITY_FLOOR`] and was clamped.
    pub clamped: bool,
}

impl DcWeights {
    pub fn from_vec(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("density weights must be finite and non-negative".into()));
        }
        Ok(Self {
            weights,
            residual_history: Vec::new(),
            clamped: false,
        })
    }

    /// All-ones weights (no compensation).
    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0; len],
            residual_history: Vec::new(),
            clamped: false,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }

    /// Entrywise square, the diagonal of `D^2`.
    pub fn squared(&self) -> DcWeights {
        DcWeights {
            weights: self.weights.iter().map(|w| w * w).collect(),
            residual_history: Vec::new(),
            clamped: self.clamped,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "iterations": self.iterations(),
            "final_residual": self.residual_history.last(),
            "clamped": self.clamped,
        });
        rawio::write_f64(path, &self.weights, &[self.weights.len()], meta)
    }

    pub fn load(path: &Path, expected_len: usize) -> Result<Self> {
        let (weights, _) = rawio::read_f64(path)?;
        ensure_len("density weights file", expected_len, weights.len())?;
        Self::from_vec(weights)
    }
}

/// Apply `C = G G^T` to real sample weights.
pub fn density_apply(plan: &NufftPlan, w: &[f64], grid: &mut [f64], out: &mut [f64]) {
    plan.spread(w, grid);
    plan.interpolate(grid, out);
}

pub fn pipe_menon(plan: &NufftPlan, max_iters: usize, tol: f64) -> Result<DcWeights> {
    pipe_menon_from(plan, vec![1.0; plan.n_samples()], max_iters, tol)
}

/// Pipe-Menon iteration from an arbitrary positive starting point.
pub fn pipe_menon_from(plan: &NufftPlan, init: Vec<f64>, max_iters: usize, tol: f64) -> Result<DcWeights> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    ensure_len("pipe_menon initial weights", plan.n_samples(), init.len())?;
    let g = plan.grid_size();
    let mut grid = vec![0.0; g * g];
    let mut cw = vec![0.0; plan.n_samples()];
    let mut w = init;
    let mut history = Vec::with_capacity(max_iters + 1);
    let mut clamped = false;

    for _ in 0..max_iters {
        density_apply(plan, &w, &mut grid, &mut cw);
        let res = cw.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
        history.push(res);
        if res < tol {
            break;
        }
        for (wi, &ci) in w.iter_mut().zip(&cw) {
            let c = if ci < DENSITY_FLOOR {
                clamped = true;
                DENSITY_FLOOR
            } else {
                ci
            };
            *wi /= c;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density compensation weights".into()));
        }
    }
    if history.len() == max_iters && history.last().is_some_and(|&r| r >= tol) {
        // the weights returned were updated after the last residual was recorded
        density_apply(plan, &w, &mut grid, &mut cw);
        history.push(cw.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max));
    }
    let tail = &history[history.len().saturating_sub(5)..];
    if tail.windows(2).any(|p| p[1] > p[0]) {
        log::warn!("density compensation residual not monotone over the last iterations: {tail:?}");
    }
    Ok(DcWeights {
        weights: w,
        residual_history: history,
        clamped,
    })
}
