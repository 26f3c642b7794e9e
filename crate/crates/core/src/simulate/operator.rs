use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coil::MeasurementModel;
use crate::error::{ensure_len, Error, Result};
use crate::image::ComplexImage;

/// A linear map on `C^dim`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        (self.f)(x)
    }
}

/// `Phi_l^H diag(w) Phi_l` for one coil.
pub struct CoilNormalOperator<'a> {
    model: &'a MeasurementModel,
    coil: usize,
    weights: &'a [f64],
}

impl<'a> CoilNormalOperator<'a> {
    pub fn new(model: &'a MeasurementModel, coil: usize, weights: &'a [f64]) -> Self {
        Self { model, coil, weights }
    }
}

impl LinearOperator for CoilNormalOperator<'_> {
    fn dim(&self) -> usize {
        self.model.side() * self.model.side()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let img = ComplexImage::from_vec(self.model.side(), x.to_vec())?;
        Ok(self.model.coil_normal_apply(self.coil, &img, self.weights)?.into_vec())
    }
}

/// Largest eigenvalue of a Hermitian PSD operator by power iteration.
///
/// Stops when the Rayleigh quotient changes by less than `tol` relative.
pub fn dominant_eigenvalue(op: &dyn LinearOperator, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    let n = op.dim();
    if n == 0 || max_iters == 0 {
        return Err(Error::InvalidArgument("power iteration needs dim > 0 and max_iters > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    normalize(&mut x)?;
    let mut last = f64::NAN;
    for _ in 0..max_iters {
        let y = op.apply(&x)?;
        ensure_len("power iteration operator output", n, y.len())?;
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
        if !lambda.is_finite() {
            return Err(Error::NonFinite("power iteration eigenvalue".into()));
        }
        x = y;
        if normalize(&mut x).is_err() {
            // the start vector lies in the null space
            return Ok(0.0);
        }
        if last.is_finite() && (lambda - last).abs() <= tol * lambda.abs() {
            return Ok(lambda);
        }
        last = lambda;
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        last_estimate: last,
    })
}

/// `sqrt(lambda_max)` of a Hermitian PSD (normal) operator.
pub fn spectral_norm(op: &dyn LinearOperator, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    dominant_eigenvalue(op, tol, max_iters, seed).map(|l| l.max(0.0).sqrt())
}

fn normalize(x: &mut [Complex64]) -> Result<()> {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("zero vector in power iteration".into()));
    }
    for z in x.iter_mut() {
        *z /= norm;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: Vec<f64>) -> FnOperator<impl Fn(&[Complex64]) -> Result<Vec<Complex64>>> {
        let n = d.len();
        FnOperator::new(n, move |x: &[Complex64]| Ok(x.iter().zip(&d).map(|(a, b)| a * *b).collect()))
    }

    #[test]
    fn identity_and_diagonal() {
        assert!((spectral_norm(&diag(vec![1.0; 5]), 1e-12, 100, 0).unwrap() - 1.0).abs() < 1e-12);
        let s = spectral_norm(&diag(vec![1.0, 4.0, 9.0]), 1e-14, 1000, 0).unwrap();
        assert!((s - 3.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn non_convergence_carries_estimate() {
        match spectral_norm(&diag(vec![1.0, 0.999, 0.998]), 1e-15, 3, 1) {
            Err(Error::NoConvergence { iterations, last_estimate }) => {
                assert_eq!(iterations, 3);
                assert!(last_estimate > 0.9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_operator() {
        assert_eq!(spectral_norm(&diag(vec![0.0; 4]), 1e-6, 10, 0).unwrap(), 0.0);
    }
}
