//! Kaiser-Bessel gridding kernel, evaluated directly (no lookup table).

use std::f64::consts::PI;

/// Modified Bessel function of the first kind, order zero, by power series.
///
/// The series converges for all real arguments; the kernel only needs
/// `|x| <= beta`, well under 50 for any sensible width.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Shape parameter `pi * sqrt(J^2/rho^2 (rho - 1/2)^2 - 0.8)`.
pub fn beatty_beta(kernel_width: usize, oversampling: f64) -> f64 {
    let j = kernel_width as f64;
    let arg = (j * j) / (oversampling * oversampling) * (oversampling - 0.5).powi(2) - 0.8;
    PI * arg.max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KaiserBessel {
    pub width: usize,
    pub beta: f64,
    peak: f64,
}

impl KaiserBessel {
    pub fn new(width: usize, beta: f64) -> Self {
        Self {
            width,
            beta,
            peak: bessel_i0(beta),
        }
    }

    /// Kernel value at offset `u` grid cells from the sample, scaled so the
    /// centre tap is 1; zero outside `|u| <= J/2`.
    pub fn eval(&self, u: f64) -> f64 {
        let half = 0.5 * self.width as f64;
        if u.abs() > half {
            return 0.0;
        }
        let t = u / half;
        bessel_i0(self.beta * (1.0 - t * t).max(0.0).sqrt()) / self.peak
    }

    /// Continuous Fourier transform of the kernel at `f` cycles per grid cell.
    pub fn transform(&self, f: f64) -> f64 {
        let j = self.width as f64;
        let a = PI * j * f;
        let z2 = self.beta * self.beta - a * a;
        let raw = if z2 > 1e-12 {
            let z = z2.sqrt();
            j * z.sinh() / z
        } else if z2 < -1e-12 {
            let z = (-z2).sqrt();
            j * z.sin() / z
        } else {
            j
        };
        raw / self.peak
    }
}
