//! Direct-sum non-uniform DFT. Exact and O(N M); used as the reference for the gridded transform.

use num_complex::Complex64;

use super::KSpaceData;
use crate::error::{ensure_len, Result};
use crate::image::ComplexImage;
use crate::trajectory::Trajectory;

/// Per-axis phase factors `exp(sign * i * k * p)` for `p` in `[-n/2, n/2)`.
fn axis_phases(k: f64, side: usize, sign: f64) -> Vec<Complex64> {
    let half = (side / 2) as f64;
    (0..side)
        .map(|i| Complex64::from_polar(1.0, sign * k * (i as f64 - half)))
        .collect()
}

/// `y_m = sum_n x_n exp(-i k_m . p_n)`.
pub fn nudft_forward(x: &ComplexImage, traj: &Trajectory) -> KSpaceData {
    let n = x.side();
    let values = traj
        .points()
        .iter()
        .map(|k| {
            let ex = axis_phases(k[0], n, -1.0);
            let ey = axis_phases(k[1], n, -1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (row, ey_r) in ey.iter().enumerate() {
                let line = &x.data()[row * n..(row + 1) * n];
                let s: Complex64 = line.iter().zip(&ex).map(|(a, b)| a * b).sum();
                acc += s * ey_r;
            }
            acc
        })
        .collect();
    KSpaceData::new(values)
}

/// `x_n = sum_m y_m exp(+i k_m . p_n)`, the conjugate transpose of [`nudft_forward`].
pub fn nudft_adjoint(y: &KSpaceData, traj: &Trajectory, side: usize) -> Result<ComplexImage> {
    ensure_len("nudft_adjoint", traj.len(), y.len())?;
    let mut out = ComplexImage::zeros(side)?;
    let data = out.data_mut();
    for (k, &v) in traj.points().iter().zip(y.values()) {
        let ex = axis_phases(k[0], side, 1.0);
        let ey = axis_phases(k[1], side, 1.0);
        for (row, ey_r) in ey.iter().enumerate() {
            let w = v * ey_r;
            for (d, e) in data[row * side..(row + 1) * side].iter_mut().zip(&ex) {
                *d += w * e;
            }
        }
    }
    Ok(out)
}

/// Dense NUDFT matrix, row-major `M x N`. Test and oracle use only.
pub fn nudft_matrix(traj: &Trajectory, side: usize) -> Vec<Complex64> {
    let n = side * side;
    let mut m = Vec::with_capacity(traj.len() * n);
    for k in traj.points() {
        for idx in 0..n {
            let (px, py) = crate::image::pixel_coord(side, idx);
            m.push(Complex64::from_polar(1.0, -(k[0] * px + k[1] * py)));
        }
    }
    m
}
