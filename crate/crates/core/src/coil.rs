//! Multi-coil measurement operator.
//!
//! Coil `l` measures `Phi_l x = F(S_l x)` where `F` is the gridded NUFFT and
//! `S_l` a diagonal sensitivity map. Maps are normalized so that
//! `sum_l |S_l[n]|^2 = 1` at every pixel. With density weights `D` the
//! back-projection is `x_b = kappa sum_l Phi_l^H D y_l` and the data
//! consistency operator is `P = sum_l Phi_l^H D Phi_l`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::dcomp::DcWeights;
use crate::error::{ensure_len, Error, Result};
use crate::image::ComplexImage;
use crate::nufft::{KSpaceData, NufftPlan};
use crate::rawio;

/// Version tag of the synthetic map recipe recorded in sidecars.
pub const MAP_RECIPE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    maps: Vec<ComplexImage>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct MapsSidecar {
    n_coils: usize,
    side: usize,
    seed: u64,
    recipe_version: u32,
}

impl SensitivityMaps {
    /// Wrap explicit maps, checking the normalization constraint to 1e-12.
    pub fn from_maps(maps: Vec<ComplexImage>, seed: u64) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(Error::InvalidArgument("at least one coil map is required".into()));
        };
        let side = first.side();
        for m in &maps {
            ensure_len("sensitivity map side", side, m.side())?;
        }
        let out = Self { maps, seed };
        let dev = out.max_constraint_deviation();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "sensitivity maps violate sum |S|^2 = 1 by {dev:e}"
            )));
        }
        Ok(out)
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn side(&self) -> usize {
        self.maps[0].side()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn maps(&self) -> &[ComplexImage] {
        &self.maps
    }

    pub fn coil(&self, l: usize) -> &ComplexImage {
        &self.maps[l]
    }

    /// `max_n |sum_l |S_l[n]|^2 - 1|`.
    pub fn max_constraint_deviation(&self) -> f64 {
        let n = self.maps[0].len();
        (0..n)
            .map(|i| {
                let s: f64 = self.maps.iter().map(|m| m.data()[i].norm_sqr()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let flat: Vec<Complex64> = self.maps.iter().flat_map(|m| m.data().iter().copied()).collect();
        let meta = serde_json::to_value(MapsSidecar {
            n_coils: self.n_coils(),
            side: self.side(),
            seed: self.seed,
            recipe_version: MAP_RECIPE_VERSION,
        })
        .map_err(|e| Error::json(path, e))?;
        rawio::write_c128(path, &flat, &[self.n_coils(), self.side(), self.side()], meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (flat, sidecar) = rawio::read_c128(path)?;
        let meta: MapsSidecar = serde_json::from_value(sidecar.meta).map_err(|e| Error::json(path, e))?;
        let n = meta.side * meta.side;
        ensure_len("sensitivity map file", meta.n_coils * n, flat.len())?;
        let maps = flat
            .chunks_exact(n)
            .map(|c| ComplexImage::from_vec(meta.side, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_maps(maps, meta.seed)
    }
}

/// Smooth synthetic coil maps: Gaussian magnitude bumps centred at evenly
/// spaced angles around the field of view, each with a linear phase ramp,
/// then normalized pixelwise. A single coil gets the all-ones map.
pub fn synth_sensitivities(n_coils: usize, side: usize, seed: u64) -> Result<SensitivityMaps> {
    if n_coils == 0 {
        return Err(Error::InvalidArgument("n_coils must be at least 1".into()));
    }
    if n_coils == 1 {
        let ones = ComplexImage::from_fn(side, |_, _| Complex64::new(1.0, 0.0))?;
        return SensitivityMaps::from_maps(vec![ones], seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = side as f64 / 2.0;
    let mut raw = Vec::with_capacity(n_coils);
    for l in 0..n_coils {
        let spacing = 2.0 * PI / n_coils as f64;
        let angle = l as f64 * spacing + rng.random_range(-0.25..0.25) * spacing;
        let radius = rng.random_range(0.6..0.95) * half;
        let (cx, cy) = (radius * angle.cos(), radius * angle.sin());
        let width = rng.random_range(0.45..0.8) * side as f64;
        let ramp_x = rng.random_range(-1.0..1.0) * PI / side as f64;
        let ramp_y = rng.random_range(-1.0..1.0) * PI / side as f64;
        let offset = rng.random_range(0.0..2.0 * PI);
        let map = ComplexImage::from_fn(side, |row, col| {
            let px = col as f64 - half;
            let py = row as f64 - half;
            let d2 = (px - cx).powi(2) + (py - cy).powi(2);
            let mag = (-d2 / (2.0 * width * width)).exp();
            Complex64::from_polar(mag, ramp_x * px + ramp_y * py + offset)
        })?;
        raw.push(map);
    }
    let n = side * side;
    for i in 0..n {
        let s: f64 = raw.iter().map(|m| m.data()[i].norm_sqr()).sum::<f64>().sqrt();
        for m in raw.iter_mut() {
            m.data_mut()[i] /= s;
        }
    }
    SensitivityMaps::from_maps(raw, seed)
}

/// How the PSF peak that fixes `kappa` is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaNorm {
    /// Per-pixel `|re| + |im|` of the complex PSF value.
    #[default]
    L1Components,
    /// Per-pixel complex modulus.
    MaxModulus,
}

/// Everything needed to apply `Phi_l`, `D` and `kappa` for one acquisition.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    maps: Arc<SensitivityMaps>,
    plan: Arc<NufftPlan>,
    dc: Arc<DcWeights>,
    kappa: f64,
}

impl MeasurementModel {
    /// Build the model and compute `kappa` from the Dirac PSF.
    pub fn new(maps: Arc<SensitivityMaps>, plan: Arc<NufftPlan>, dc: Arc<DcWeights>, norm: KappaNorm) -> Result<Self> {
        let kappa = compute_kappa(&maps, &plan, &dc, norm)?;
        Self::with_kappa(maps, plan, dc, kappa)
    }

    pub fn with_kappa(maps: Arc<SensitivityMaps>, plan: Arc<NufftPlan>, dc: Arc<DcWeights>, kappa: f64) -> Result<Self> {
        ensure_len("measurement model map side", plan.side(), maps.side())?;
        ensure_len("measurement model density weights", plan.n_samples(), dc.len())?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { maps, plan, dc, kappa })
    }

    pub fn maps(&self) -> &Arc<SensitivityMaps> {
        &self.maps
    }

    pub fn plan(&self) -> &Arc<NufftPlan> {
        &self.plan
    }

    pub fn dc(&self) -> &Arc<DcWeights> {
        &self.dc
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_coils(&self) -> usize {
        self.maps.n_coils()
    }

    pub fn side(&self) -> usize {
        self.plan.side()
    }

    /// `Phi_l x = F(S_l x)` for one coil.
    pub fn coil_forward(&self, l: usize, x: &ComplexImage) -> Result<KSpaceData> {
        ensure_len("coil forward image side", self.side(), x.side())?;
        let s = self.maps.coil(l);
        let sx = ComplexImage::from_vec(
            x.side(),
            x.data().iter().zip(s.data()).map(|(a, b)| a * b).collect(),
        )?;
        self.plan.forward(&sx)
    }

    /// `Phi_l^H (w . y)` for one coil.
    pub fn coil_adjoint_weighted(&self, l: usize, y: &KSpaceData, weights: &[f64]) -> Result<ComplexImage> {
        ensure_len("coil adjoint data length", self.plan.n_samples(), y.len())?;
        ensure_len("coil adjoint weights", self.plan.n_samples(), weights.len())?;
        let wy = KSpaceData::new(y.values().iter().zip(weights).map(|(v, w)| v * *w).collect());
        let mut img = self.plan.adjoint(&wy)?;
        for (p, s) in img.data_mut().iter_mut().zip(self.maps.coil(l).data()) {
            *p *= s.conj();
        }
        Ok(img)
    }

    /// Noiseless per-coil data `y_l = F(S_l x)`.
    pub fn forward(&self, x: &ComplexImage) -> Result<Vec<KSpaceData>> {
        (0..self.n_coils()).map(|l| self.coil_forward(l, x)).collect()
    }

    /// `sum_l Phi_l^H (w . y_l)`, coils summed in index order.
    pub fn adjoint_weighted(&self, y: &[KSpaceData], weights: &[f64]) -> Result<ComplexImage> {
        ensure_len("multi-coil data", self.n_coils(), y.len())?;
        let mut acc = ComplexImage::zeros(self.side())?;
        for (l, yl) in y.iter().enumerate() {
            acc.add_assign(&self.coil_adjoint_weighted(l, yl, weights)?)?;
        }
        Ok(acc)
    }

    /// `x_b = kappa sum_l Phi_l^H D y_l`.
    pub fn back_project(&self, y: &[KSpaceData]) -> Result<ComplexImage> {
        Ok(self.adjoint_weighted(y, self.dc.weights())?.scaled(self.kappa))
    }

    /// `sum_l Phi_l^H diag(w) Phi_l x`.
    pub fn normal_apply_weighted(&self, x: &ComplexImage, weights: &[f64]) -> Result<ComplexImage> {
        let y = self.forward(x)?;
        self.adjoint_weighted(&y, weights)
    }

    /// `P x = sum_l Phi_l^H D Phi_l x`, without `kappa`.
    pub fn normal_apply(&self, x: &ComplexImage) -> Result<ComplexImage> {
        self.normal_apply_weighted(x, self.dc.weights())
    }

    /// Single-coil normal operator `Phi_l^H diag(w) Phi_l x`.
    pub fn coil_normal_apply(&self, l: usize, x: &ComplexImage, weights: &[f64]) -> Result<ComplexImage> {
        let y = self.coil_forward(l, x)?;
        self.coil_adjoint_weighted(l, &y, weights)
    }
}

/// `1 / max_n ||(P delta)[n]||` for the Dirac image `delta`, with `P` including `D`.
pub fn compute_kappa(maps: &Arc<SensitivityMaps>, plan: &Arc<NufftPlan>, dc: &Arc<DcWeights>, norm: KappaNorm) -> Result<f64> {
    let model = MeasurementModel::with_kappa(maps.clone(), plan.clone(), dc.clone(), 1.0)?;
    let psf = model.normal_apply(&ComplexImage::dirac(plan.side())?)?;
    let peak = psf
        .data()
        .iter()
        .map(|z| match norm {
            KappaNorm::L1Components => z.re.abs() + z.im.abs(),
            KappaNorm::MaxModulus => z.norm(),
        })
        .fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Degenerate(format!("point spread function peak is {peak}")));
    }
    Ok(1.0 / peak)
}
