use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Unnormalized square 2D FFT pair (forward uses `exp(-i ...)`).
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse, the exact adjoint of [`Fft2::forward`].
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        fft.process(data);
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        transpose(data, &mut t, n);
        fft.process(&mut t);
        transpose(&t, data, n);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for rb in (0..n).step_by(B) {
        for cb in (0..n).step_by(B) {
            for r in rb..(rb + B).min(n) {
                for c in cb..(cb + B).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

/// Centered 2D DFT of a side-`n` image: output entry for frequency
/// `(j_x, j_y)`, `j` in `[-n/2, n/2)`, is `sum_p x(p) exp(-2 pi i (j . p)/n)`,
/// ordered with `j_y` outermost (the ordering of [`crate::Trajectory::cartesian`]).
pub fn centered_fft2(image: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(image.len(), n * n);
    let half = n / 2;
    // ifftshift: pixel coordinate p lives at array index p mod n
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for row in 0..n {
        for col in 0..n {
            let r = (row + n - half) % n;
            let c = (col + n - half) % n;
            buf[r * n + c] = image[row * n + col];
        }
    }
    Fft2::new(n).forward(&mut buf);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for jy in 0..n {
        for jx in 0..n {
            let r = (jy + n - half) % n;
            let c = (jx + n - half) % n;
            out[jy * n + jx] = buf[r * n + c];
        }
    }
    out
}
