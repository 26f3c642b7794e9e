//! Ground-truth phantoms, noise calibration and synthetic acquisitions.
//!
//! Per-coil k-space noise std is `tau_l = sigma sqrt(2 L_l^2 / L'_l)`, with
//! `L_l` and `L'_l` from [`coil_calibration`]. Data sets of such problems are
//! written by [`dataset::make_dataset`].

pub mod dataset;
mod operator;
mod phantom;
mod problem;

pub use operator::{dominant_eigenvalue, spectral_norm, CoilNormalOperator, FnOperator, LinearOperator};
pub use phantom::{make_phantom, nearest_rank_percentile, Phantom, DEFAULT_N_ELLIPSES, DEFAULT_PERCENTILE, FOREGROUND_THRESHOLD};
pub use problem::{InverseProblem, ProblemRecord};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coil::MeasurementModel;
use crate::error::{Error, Result};
use crate::nufft::KSpaceData;

/// Relative eigenvalue change at which calibration power iterations stop.
pub const CALIBRATION_TOL: f64 = 1e-5;
pub const CALIBRATION_MAX_ITERS: usize = 500;

/// How the k-space noise std `tau` is split over real and imaginary parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// Circular complex noise with total std `tau`; each component has `tau / sqrt(2)`.
    #[default]
    CircularTotal,
    /// Each component has std `tau`.
    PerComponent,
}

impl NoiseConvention {
    pub fn component_std(self, tau: f64) -> f64 {
        match self {
            NoiseConvention::CircularTotal => tau * std::f64::consts::FRAC_1_SQRT_2,
            NoiseConvention::PerComponent => tau,
        }
    }
}

/// `sigma sqrt(2 L_once^2 / L_twice)`.
pub fn noise_std(sigma: f64, l_once: f64, l_twice: f64) -> Result<f64> {
    for (name, v) in [("sigma", sigma), ("L", l_once), ("L'", l_twice)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(sigma * (2.0 * l_once * l_once / l_twice).sqrt())
}

/// Calibration constants of one coil.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoilCalibration {
    /// `L_l`, DC applied once.
    pub l_once: f64,
    /// `L'_l`, DC applied twice.
    pub l_twice: f64,
}

/// `L_l = lambda_max(Phi_l^H D Phi_l)` and `L'_l = lambda_max(Phi_l^H D^2 Phi_l)`.
///
/// Both are norms of the normal operators themselves (squared spectral norms
/// of `D^(1/2) Phi_l` and `D Phi_l`). Under this reading the back-projected
/// noise level does not change when `Phi` is rescaled; taking square roots
/// instead would make it scale as `|a|^(-1/2)`.
pub fn coil_calibration(model: &MeasurementModel, coil: usize, tol: f64, max_iters: usize, seed: u64) -> Result<CoilCalibration> {
    let d = model.dc().weights();
    let d2: Vec<f64> = d.iter().map(|w| w * w).collect();
    let once = CoilNormalOperator::new(model, coil, d);
    let twice = CoilNormalOperator::new(model, coil, &d2);
    Ok(CoilCalibration {
        l_once: dominant_eigenvalue(&once, tol, max_iters, seed)?,
        l_twice: dominant_eigenvalue(&twice, tol, max_iters, seed.wrapping_add(1))?,
    })
}

/// Calibrate every coil with independent start vectors derived from `seed`.
pub fn calibrate(model: &MeasurementModel, seed: u64) -> Result<Vec<CoilCalibration>> {
    (0..model.n_coils())
        .map(|l| coil_calibration(model, l, CALIBRATION_TOL, CALIBRATION_MAX_ITERS, seed.wrapping_add(2 * l as u64)))
        .collect()
}

/// Pure circular Gaussian noise for each coil, `component_std(tau_l)` per component.
pub fn draw_noise(lens: usize, taus: &[f64], convention: NoiseConvention, rng: &mut ChaCha8Rng) -> Vec<KSpaceData> {
    taus.iter()
        .map(|&tau| {
            let s = convention.component_std(tau);
            KSpaceData::new(
                (0..lens)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Per-component variance of a zero-mean complex noise image, `mean(|e|^2) / 2`.
///
/// This is the image-domain quantity `sigma^2` of the calibration: the factor
/// 2 in the `tau` formula moves from total complex variance to one component.
pub fn image_noise_variance(e: &crate::image::ComplexImage) -> f64 {
    e.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * e.len() as f64)
}

/// `y_l = Phi_l x + n_l`, with `tau_l` calibrated to the phantom's `sigma`, and `x_b` from `y`.
pub fn simulate_acquisition(
    id: &str,
    phantom: &Phantom,
    model: MeasurementModel,
    seed: u64,
    convention: NoiseConvention,
) -> Result<InverseProblem> {
    let calibration = calibrate(&model, seed)?;
    simulate_with_calibration(id, phantom, model, calibration, seed, convention)
}

/// As [`simulate_acquisition`] with precomputed calibration constants.
pub fn simulate_with_calibration(
    id: &str,
    phantom: &Phantom,
    model: MeasurementModel,
    calibration: Vec<CoilCalibration>,
    seed: u64,
    convention: NoiseConvention,
) -> Result<InverseProblem> {
    if calibration.len() != model.n_coils() {
        return Err(Error::SizeMismatch {
            context: "calibration per coil",
            expected: model.n_coils(),
            actual: calibration.len(),
        });
    }
    let taus = calibration
        .iter()
        .map(|c| noise_std(phantom.sigma(), c.l_once, c.l_twice))
        .collect::<Result<Vec<_>>>()?;
    let clean = model.forward(phantom.image())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = draw_noise(model.plan().n_samples(), &taus, convention, &mut rng);
    let data: Vec<KSpaceData> = clean
        .iter()
        .zip(&noise)
        .map(|(c, n)| KSpaceData::new(c.values().iter().zip(n.values()).map(|(a, b)| a + b).collect()))
        .collect();
    let x_b = model.back_project(&data)?;
    Ok(InverseProblem {
        id: id.to_string(),
        seed,
        phantom: phantom.clone(),
        model,
        calibration,
        tau: taus,
        convention,
        data,
        x_b,
    })
}
