//! Square images on the centered pixel grid.
//!
//! Entry `(row, col)` of a side-`n` image sits at pixel coordinate
//! `(col - n/2, row - n/2)`, so the pixel at `(n/2, n/2)` is the origin.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{ensure_len, Error, Result};

/// Complex-valued square image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    side: usize,
    data: Vec<Complex64>,
}

/// Real-valued square image, row-major. Used for magnitudes and magnitude residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    side: usize,
    data: Vec<f64>,
}

fn check_side(side: usize) -> Result<()> {
    if side == 0 || !side.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "image side must be positive and even, got {side}"
        )));
    }
    Ok(())
}

impl ComplexImage {
    pub fn zeros(side: usize) -> Result<Self> {
        check_side(side)?;
        Ok(Self {
            side,
            data: vec![Complex64::new(0.0, 0.0); side * side],
        })
    }

    pub fn from_vec(side: usize, data: Vec<Complex64>) -> Result<Self> {
        check_side(side)?;
        ensure_len("ComplexImage::from_vec", side * side, data.len())?;
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("complex image data".into()));
        }
        Ok(Self { side, data })
    }

    /// Build from a per-pixel function of `(row, col)`.
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        check_side(side)?;
        let mut data = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                data.push(f(row, col));
            }
        }
        Self::from_vec(side, data)
    }

    /// Dirac image whose central element is `sqrt(2)(1+i)/2`.
    pub fn dirac(side: usize) -> Result<Self> {
        let mut img = Self::zeros(side)?;
        let c = img.index(side / 2, side / 2);
        img.data[c] = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        Ok(img)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[self.index(row, col)]
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage {
            side: self.side,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn re(&self) -> RealImage {
        RealImage {
            side: self.side,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> RealImage {
        RealImage {
            side: self.side,
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mean_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum::<f64>() / self.data.len() as f64
    }

    /// `sum_n self[n] * conj(other[n])`.
    pub fn inner(&self, other: &ComplexImage) -> Complex64 {
        debug_assert_eq!(self.side, other.side);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> ComplexImage {
        ComplexImage {
            side: self.side,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scaled_complex(&self, s: Complex64) -> ComplexImage {
        ComplexImage {
            side: self.side,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &ComplexImage) -> Result<ComplexImage> {
        ensure_len("ComplexImage::add", self.len(), other.len())?;
        Ok(ComplexImage {
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &ComplexImage) -> Result<ComplexImage> {
        ensure_len("ComplexImage::sub", self.len(), other.len())?;
        Ok(ComplexImage {
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &ComplexImage) -> Result<()> {
        ensure_len("ComplexImage::add_assign", self.len(), other.len())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl RealImage {
    pub fn zeros(side: usize) -> Result<Self> {
        check_side(side)?;
        Ok(Self {
            side,
            data: vec![0.0; side * side],
        })
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        check_side(side)?;
        ensure_len("RealImage::from_vec", side * side, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real image data".into()));
        }
        Ok(Self { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_complex(&self) -> ComplexImage {
        ComplexImage {
            side: self.side,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Pixel coordinate `(p_x, p_y)` of row-major entry `idx` in a side-`n` image.
pub fn pixel_coord(side: usize, idx: usize) -> (f64, f64) {
    let half = (side / 2) as f64;
    let row = idx / side;
    let col = idx % side;
    (col as f64 - half, row as f64 - half)
}
