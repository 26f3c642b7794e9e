//! Image quality (PSNR, SSIM) and data fidelity (RDR) metrics.
//!
//! PSNR and SSIM compare magnitudes, so a global phase rotation of the
//! estimate leaves them unchanged. The dynamic range `M` is the largest
//! ground-truth modulus.

use crate::error::{ensure_len, Error, Result};
use crate::image::ComplexImage;

fn magnitudes(gt: &ComplexImage, est: &ComplexImage) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    ensure_len("metric image side", gt.side(), est.side())?;
    let a = gt.magnitude().into_vec();
    let b = est.magnitude().into_vec();
    let m = a.iter().copied().fold(0.0, f64::max);
    if !(m > 0.0) {
        return Err(Error::Degenerate("ground truth is identically zero".into()));
    }
    Ok((a, b, m))
}

/// `10 log10(N M^2 / || |gt| - |est| ||^2)`. Identical magnitudes give `f64::INFINITY`.
pub fn psnr(gt: &ComplexImage, est: &ComplexImage) -> Result<f64> {
    let (a, b, m) = magnitudes(gt, est)?;
    let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (a.len() as f64 * m * m / err).log10())
}

#[derive(Clone, Copy)]
struct Moments {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

fn ssim_formula(s: Moments, m: f64) -> f64 {
    let c1 = (0.01 * m).powi(2);
    let c2 = (0.03 * m).powi(2);
    ((2.0 * s.mu_a * s.mu_b + c1) * (2.0 * s.cov + c2))
        / ((s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2))
}

fn weighted_moments(a: &[f64], b: &[f64], w: &[f64]) -> Moments {
    let total: f64 = w.iter().sum();
    let mu_a = a.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let mu_b = b.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for ((x, y), w) in a.iter().zip(b).zip(w) {
        var_a += w * (x - mu_a).powi(2);
        var_b += w * (y - mu_b).powi(2);
        cov += w * (x - mu_a) * (y - mu_b);
    }
    Moments {
        mu_a,
        mu_b,
        var_a: var_a / total,
        var_b: var_b / total,
        cov: cov / total,
    }
}

/// Whole-image SSIM on magnitudes with `c1 = (0.01 M)^2`, `c2 = (0.03 M)^2`.
pub fn ssim_global(gt: &ComplexImage, est: &ComplexImage) -> Result<f64> {
    let (a, b, m) = magnitudes(gt, est)?;
    let w = vec![1.0; a.len()];
    Ok(ssim_formula(weighted_moments(&a, &b, &w), m))
}

/// Mean SSIM over 11x11 Gaussian windows (sigma 1.5) fully inside the image.
///
/// Cross-check only; reported results use [`ssim_global`].
pub fn ssim_windowed(gt: &ComplexImage, est: &ComplexImage) -> Result<f64> {
    const WIN: usize = 11;
    let (a, b, m) = magnitudes(gt, est)?;
    let n = gt.side();
    if n < WIN {
        return Err(Error::InvalidArgument(format!("windowed SSIM needs side >= {WIN}, got {n}")));
    }
    let c = (WIN / 2) as f64;
    let kernel: Vec<f64> = (0..WIN * WIN)
        .map(|i| {
            let (r, q) = ((i / WIN) as f64 - c, (i % WIN) as f64 - c);
            (-(r * r + q * q) / (2.0 * 1.5 * 1.5)).exp()
        })
        .collect();
    let mut pa = vec![0.0; WIN * WIN];
    let mut pb = vec![0.0; WIN * WIN];
    let mut acc = 0.0;
    let mut count = 0usize;
    for r0 in 0..=n - WIN {
        for c0 in 0..=n - WIN {
            for i in 0..WIN {
                let src = (r0 + i) * n + c0;
                pa[i * WIN..(i + 1) * WIN].copy_from_slice(&a[src..src + WIN]);
                pb[i * WIN..(i + 1) * WIN].copy_from_slice(&b[src..src + WIN]);
            }
            acc += ssim_formula(weighted_moments(&pa, &pb, &kernel), m);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Residual-to-dirty ratio `||r|| / ||x_b||`.
pub fn rdr(x_b: &ComplexImage, r: &ComplexImage) -> Result<f64> {
    ensure_len("rdr image side", x_b.side(), r.side())?;
    let denom = x_b.norm();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("back-projected data is zero".into()));
    }
    Ok(r.norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn img(side: usize, v: &[f64]) -> ComplexImage {
        ComplexImage::from_vec(side, v.iter().map(|&x| Complex64::new(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let gt = img(2, &[1.0, 0.5, 0.25, 0.0]);
        assert_eq!(psnr(&gt, &gt).unwrap(), f64::INFINITY);
        let est = img(2, &[0.9, 0.5, 0.25, 0.0]);
        // diff (0.1, 0, 0, 0) squared norm 0.01 -> 10 log10(4/0.01)
        assert!((psnr(&gt, &est).unwrap() - 10.0 * 400f64.log10()).abs() < 1e-12);
        let est = img(2, &[0.8, 0.5, 0.25, 0.0]);
        assert!((psnr(&gt, &est).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_matches_explicit_noise_norm() {
        let side = 16;
        let gt = ComplexImage::from_fn(side, |r, c| Complex64::new(((r * 7 + c * 3) % 11) as f64 / 10.0, 0.0)).unwrap();
        let m = gt.max_abs();
        let noise: Vec<f64> = (0..side * side).map(|i| 0.01 * ((i * 37 % 17) as f64 - 8.0)).collect();
        let est = ComplexImage::from_vec(
            side,
            gt.data().iter().zip(&noise).map(|(g, e)| Complex64::new(g.re + e, 0.0)).collect(),
        )
        .unwrap();
        let err: f64 = gt.data().iter().zip(est.data()).map(|(g, e)| (g.norm() - e.norm()).powi(2)).sum();
        let expected = 10.0 * ((side * side) as f64 * m * m / err).log10();
        assert!((psnr(&gt, &est).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn ssim_closed_forms() {
        let gt = img(2, &[0.3, 0.3, 0.3, 0.3]);
        assert!((ssim_global(&gt, &gt).unwrap() - 1.0).abs() < 1e-15);
        // zero-variance pair shifted by 0.5 M: only the luminance term survives
        let est = img(2, &[0.45, 0.45, 0.45, 0.45]);
        let c1 = (0.01 * 0.3f64).powi(2);
        let expected = (2.0 * 0.3 * 0.45 + c1) / (0.09 + 0.45 * 0.45 + c1);
        assert!((ssim_global(&gt, &est).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_negative_for_anticorrelated_magnitudes() {
        let gt = img(2, &[1.0, 0.0, 1.0, 0.0]);
        let est = img(2, &[0.0, 1.0, 0.0, 1.0]);
        assert!(ssim_global(&gt, &est).unwrap() < 0.0);
        let est = img(2, &[-1.0, 0.0, -1.0, 0.0]);
        assert!((ssim_global(&gt, &est).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn windowed_ssim_identity_and_size_check() {
        let gt = ComplexImage::from_fn(16, |r, c| Complex64::new((r * c) as f64 / 225.0, 0.0)).unwrap();
        assert!((ssim_windowed(&gt, &gt).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim_windowed(&img(2, &[1.0; 4]), &img(2, &[1.0; 4])).is_err());
    }

    #[test]
    fn rdr_examples() {
        let xb = img(2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((rdr(&xb, &xb).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rdr(&xb, &ComplexImage::zeros(2).unwrap()).unwrap(), 0.0);
        let half = xb.scaled(0.5);
        assert!((rdr(&xb, &half).unwrap() - 0.5).abs() < 1e-15);
        assert!(rdr(&ComplexImage::zeros(2).unwrap(), &xb).is_err());
    }

    #[test]
    fn size_mismatch_and_zero_gt_rejected() {
        let a = img(2, &[1.0; 4]);
        let b = ComplexImage::zeros(4).unwrap();
        assert!(psnr(&a, &b).is_err());
        assert!(ssim_global(&a, &b).is_err());
        assert!(psnr(&ComplexImage::zeros(2).unwrap(), &a).is_err());
    }

    proptest! {
        #[test]
        fn metrics_ignore_global_phase(vals in proptest::collection::vec(-1.0f64..1.0, 32), phase in 0.0f64..std::f64::consts::TAU) {
            let gt = ComplexImage::from_vec(4, vals[..16].iter().map(|&v| Complex64::new(v, 0.5)).collect()).unwrap();
            let est = ComplexImage::from_vec(4, vals[16..].iter().map(|&v| Complex64::new(v, -0.2)).collect()).unwrap();
            let rot = est.scaled_complex(Complex64::from_polar(1.0, phase));
            prop_assert!((psnr(&gt, &est).unwrap() - psnr(&gt, &rot).unwrap()).abs() < 1e-9);
            let s = ssim_global(&gt, &est).unwrap();
            prop_assert!((s - ssim_global(&gt, &rot).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }
}
