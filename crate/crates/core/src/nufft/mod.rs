//! Non-uniform Fourier transforms on radian-valued k-space coordinates.
//!
//! Sign convention: the forward transform is `y_m = sum_n x_n exp(-i k_m . p_n)`
//! with `p_n` the centered integer pixel coordinate. No `1/sqrt(N)` factor is applied.
//!
//! [`NufftPlan`] realizes the transform by Kaiser-Bessel gridding:
//! deapodize, zero-pad to the oversampled grid, FFT, interpolate. Its adjoint
//! is the literal transpose-conjugate of those steps, so the pair satisfies the
//! adjoint identity to rounding even though each only approximates the NUDFT.

mod fft;
mod kernel;
mod nudft;

pub use fft::{centered_fft2, Fft2};
pub use kernel::{beatty_beta, bessel_i0, KaiserBessel};
pub use nudft::{nudft_adjoint, nudft_forward, nudft_matrix};

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{ensure_len, Error, Result};
use crate::image::ComplexImage;
use crate::rawio;
use crate::trajectory::Trajectory;

pub const DEFAULT_OVERSAMPLING: f64 = 2.0;
pub const DEFAULT_KERNEL_WIDTH: usize = 6;

/// One complex value per trajectory sample, spoke-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    values: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum_m self[m] conj(other[m])`.
    pub fn inner(&self, other: &KSpaceData) -> Complex64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn save(&self, path: &std::path::Path, meta: serde_json::Value) -> Result<()> {
        rawio::write_c128(path, &self.values, &[self.values.len()], meta)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let (values, _) = rawio::read_c128(path)?;
        Ok(Self { values })
    }
}

/// Precomputed gridding structure for one trajectory and image side.
#[derive(Clone, Debug)]
pub struct NufftPlan {
    trajectory: Arc<Trajectory>,
    side: usize,
    grid: usize,
    oversampling: f64,
    kernel: KaiserBessel,
    /// `M * J^2` flattened grid indices.
    indices: Vec<u32>,
    /// `M * J^2` interpolation weights matching `indices`.
    weights: Vec<f64>,
    /// `1 / psi_hat(p_x) psi_hat(p_y)` per image pixel.
    deapod: Vec<f64>,
    fft: Fft2,
}

impl NufftPlan {
    pub fn new(trajectory: Arc<Trajectory>, side: usize, oversampling: f64, kernel_width: usize) -> Result<Self> {
        if side == 0 || !side.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("image side must be even, got {side}")));
        }
        if !(oversampling >= 1.25) {
            return Err(Error::InvalidArgument(format!(
                "oversampling must be at least 1.25, got {oversampling}"
            )));
        }
        if kernel_width < 2 {
            return Err(Error::InvalidArgument(format!(
                "kernel width must be at least 2, got {kernel_width}"
            )));
        }
        let mut grid = (oversampling * side as f64).ceil() as usize;
        grid += grid % 2;
        if kernel_width > grid {
            return Err(Error::InvalidArgument(format!(
                "oversampled grid of {grid} cells is too small for kernel width {kernel_width}"
            )));
        }
        let kernel = KaiserBessel::new(kernel_width, beatty_beta(kernel_width, oversampling));

        let m = trajectory.len();
        let jj = kernel_width * kernel_width;
        let mut indices = Vec::with_capacity(m * jj);
        let mut weights = Vec::with_capacity(m * jj);
        let scale = grid as f64 / (2.0 * PI);
        let g = grid as i64;
        let mut wx = vec![0.0; kernel_width];
        let mut wy = vec![0.0; kernel_width];
        let mut ix = vec![0usize; kernel_width];
        let mut iy = vec![0usize; kernel_width];
        for k in trajectory.points() {
            let kx = k[0] * scale;
            let ky = k[1] * scale;
            let half = 0.5 * kernel_width as f64;
            let x0 = (kx - half).floor() as i64 + 1;
            let y0 = (ky - half).floor() as i64 + 1;
            for a in 0..kernel_width {
                let jx = x0 + a as i64;
                let jy = y0 + a as i64;
                wx[a] = kernel.eval(kx - jx as f64);
                wy[a] = kernel.eval(ky - jy as f64);
                ix[a] = jx.rem_euclid(g) as usize;
                iy[a] = jy.rem_euclid(g) as usize;
            }
            for b in 0..kernel_width {
                for a in 0..kernel_width {
                    indices.push((iy[b] * grid + ix[a]) as u32);
                    weights.push(wy[b] * wx[a]);
                }
            }
        }

        let half = (side / 2) as f64;
        let axis: Vec<f64> = (0..side)
            .map(|i| kernel.transform((i as f64 - half) / grid as f64))
            .collect();
        let mut deapod = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                deapod.push(1.0 / (axis[row] * axis[col]));
            }
        }

        Ok(Self {
            trajectory,
            side,
            grid,
            oversampling,
            kernel,
            indices,
            weights,
            deapod,
            fft: Fft2::new(grid),
        })
    }

    pub fn with_defaults(trajectory: Arc<Trajectory>, side: usize) -> Result<Self> {
        Self::new(trajectory, side, DEFAULT_OVERSAMPLING, DEFAULT_KERNEL_WIDTH)
    }

    pub fn trajectory(&self) -> &Arc<Trajectory> {
        &self.trajectory
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    pub fn kernel(&self) -> KaiserBessel {
        self.kernel
    }

    pub fn n_samples(&self) -> usize {
        self.trajectory.len()
    }

    pub fn taps_per_sample(&self) -> usize {
        self.kernel.width * self.kernel.width
    }

    /// Grid indices and weights touched by sample `m`.
    pub fn sample_taps(&self, m: usize) -> (&[u32], &[f64]) {
        let jj = self.taps_per_sample();
        (&self.indices[m * jj..(m + 1) * jj], &self.weights[m * jj..(m + 1) * jj])
    }

    pub fn deapodization(&self) -> &[f64] {
        &self.deapod
    }

    /// Gridding interpolation `G`: oversampled grid to samples.
    pub fn interpolate<T>(&self, grid: &[T], out: &mut [T])
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let jj = self.taps_per_sample();
        for (m, o) in out.iter_mut().enumerate() {
            let idx = &self.indices[m * jj..(m + 1) * jj];
            let w = &self.weights[m * jj..(m + 1) * jj];
            let mut acc = T::default();
            for (&i, &wi) in idx.iter().zip(w) {
                acc += grid[i as usize] * wi;
            }
            *o = acc;
        }
    }

    /// Transpose of [`NufftPlan::interpolate`]: samples spread onto the grid. Overwrites `grid`.
    pub fn spread<T>(&self, samples: &[T], grid: &mut [T])
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        grid.iter_mut().for_each(|g| *g = T::default());
        let jj = self.taps_per_sample();
        for (m, &s) in samples.iter().enumerate() {
            let idx = &self.indices[m * jj..(m + 1) * jj];
            let w = &self.weights[m * jj..(m + 1) * jj];
            for (&i, &wi) in idx.iter().zip(w) {
                grid[i as usize] += s * wi;
            }
        }
    }

    pub fn forward(&self, x: &ComplexImage) -> Result<KSpaceData> {
        ensure_len("nufft_forward image side", self.side, x.side())?;
        let (n, g) = (self.side, self.grid);
        let half = n / 2;
        let mut grid = vec![Complex64::new(0.0, 0.0); g * g];
        for row in 0..n {
            let gr = (row + g - half) % g;
            for col in 0..n {
                let gc = (col + g - half) % g;
                let i = row * n + col;
                grid[gr * g + gc] = x.data()[i] * self.deapod[i];
            }
        }
        self.fft.forward(&mut grid);
        let mut y = KSpaceData::zeros(self.n_samples());
        self.interpolate(&grid, y.values_mut());
        Ok(y)
    }

    pub fn adjoint(&self, y: &KSpaceData) -> Result<ComplexImage> {
        ensure_len("nufft_adjoint data length", self.n_samples(), y.len())?;
        let (n, g) = (self.side, self.grid);
        let half = n / 2;
        let mut grid = vec![Complex64::new(0.0, 0.0); g * g];
        self.spread(y.values(), &mut grid);
        self.fft.inverse(&mut grid);
        let mut out = ComplexImage::zeros(n)?;
        let data = out.data_mut();
        for row in 0..n {
            let gr = (row + g - half) % g;
            for col in 0..n {
                let gc = (col + g - half) % g;
                let i = row * n + col;
                data[i] = grid[gr * g + gc] * self.deapod[i];
            }
        }
        Ok(out)
    }
}

/// Relative l2 distance `||a - b|| / ||b||`.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
