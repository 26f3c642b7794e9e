use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::ComplexImage;

pub const DEFAULT_PERCENTILE: f64 = 6.0;
pub const DEFAULT_N_ELLIPSES: usize = 8;
/// Pixels at or below this modulus are background for the percentile.
pub const FOREGROUND_THRESHOLD: f64 = 1e-6;

/// Log10 of the body-to-structure amplitude ratio: truncated normal on `[0, 3]`.
const BODY_LOG_MEAN: f64 = 1.4;
const BODY_LOG_STD: f64 = 0.55;

/// Peak-normalized complex ground truth with its faint-intensity level.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    image: ComplexImage,
    sigma: f64,
    seed: u64,
    percentile: f64,
}

impl Phantom {
    /// Normalize `image` to unit peak modulus and measure `sigma`.
    pub fn from_image(image: ComplexImage, percentile: f64, seed: u64) -> Result<Self> {
        check_percentile(percentile)?;
        let peak = image.max_abs();
        if !(peak > 0.0) {
            return Err(Error::Degenerate("phantom image is zero".into()));
        }
        let image = image.scaled(1.0 / peak);
        let fg: Vec<f64> = image
            .data()
            .iter()
            .map(|z| z.norm())
            .filter(|&m| m > FOREGROUND_THRESHOLD)
            .collect();
        let sigma = nearest_rank_percentile(fg, percentile)?.min(1.0);
        Ok(Self {
            image,
            sigma,
            seed,
            percentile,
        })
    }

    /// Rebuild from stored parts (image already normalized, sigma already measured).
    pub(crate) fn from_parts(image: ComplexImage, sigma: f64, seed: u64, percentile: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidArgument(format!("sigma must be in (0, 1], got {sigma}")));
        }
        Ok(Self {
            image,
            sigma,
            seed,
            percentile,
        })
    }

    pub fn image(&self) -> &ComplexImage {
        &self.image
    }

    pub fn side(&self) -> usize {
        self.image.side()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dr(&self) -> f64 {
        1.0 / self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn percentile(&self) -> f64 {
        self.percentile
    }

    /// Same image with an explicit noise level.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidArgument(format!("sigma must be in (0, 1], got {sigma}")));
        }
        Ok(Self { sigma, ..self.clone() })
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 50.0) {
        return Err(Error::InvalidArgument(format!("percentile must be in (0, 50], got {p}")));
    }
    Ok(())
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn nearest_rank_percentile(mut values: Vec<f64>, p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Degenerate("no foreground pixels".into()));
    }
    values.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * values.len() as f64).ceil().max(1.0) as usize;
    Ok(values[rank.min(values.len()) - 1])
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn random(rng: &mut ChaCha8Rng, centre_radius: f64, axes: (f64, f64)) -> Self {
        let r = centre_radius * rng.random::<f64>().sqrt();
        let t = rng.random_range(0.0..2.0 * PI);
        let rot = rng.random_range(0.0..PI);
        Self {
            cx: r * t.cos(),
            cy: r * t.sin(),
            a: rng.random_range(axes.0..axes.1),
            b: rng.random_range(axes.0..axes.1),
            cos: rot.cos(),
            sin: rot.sin(),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// Random ellipse phantom: one large faint body plus `n_ellipses - 1` brighter
/// structures inside it, all real non-negative amplitudes under one smooth phase.
///
/// The body amplitude is `10^-u` with `u` a truncated normal, which sets the
/// dynamic range. A single ellipse gives a constant-modulus phantom (DR 1).
pub fn make_phantom(side: usize, n_ellipses: usize, seed: u64, percentile: f64) -> Result<Phantom> {
    if n_ellipses == 0 {
        return Err(Error::InvalidArgument("n_ellipses must be at least 1".into()));
    }
    check_percentile(percentile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = Ellipse::random(&mut rng, 0.05, (0.7, 0.92));
    let log_ratio = Normal::new(BODY_LOG_MEAN, BODY_LOG_STD).expect("valid normal");
    let u = loop {
        let v: f64 = log_ratio.sample(&mut rng);
        if (0.0..=3.0).contains(&v) {
            break v;
        }
    };
    let body_amp = if n_ellipses == 1 { 1.0 } else { 10f64.powf(-u) };
    let inner: Vec<(Ellipse, f64)> = (1..n_ellipses)
        .map(|_| {
            let e = Ellipse::random(&mut rng, 0.5, (0.08, 0.4));
            (e, rng.random_range(0.2..1.0))
        })
        .collect();
    let c = [
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(-0.5 * PI..0.5 * PI),
        rng.random_range(-0.5 * PI..0.5 * PI),
        rng.random_range(-0.5 * PI..0.5 * PI),
    ];
    let half = side as f64 / 2.0;
    let img = ComplexImage::from_fn(side, |row, col| {
        let x = (col as f64 - half) / half;
        let y = (row as f64 - half) / half;
        if !body.contains(x, y) {
            return Complex64::new(0.0, 0.0);
        }
        let amp = body_amp + inner.iter().filter(|(e, _)| e.contains(x, y)).map(|(_, a)| a).sum::<f64>();
        let phase = c[0] + c[1] * x + c[2] * y + c[3] * (x * x + y * y);
        Complex64::from_polar(amp, phase)
    })?;
    Phantom::from_image(img, percentile, seed)
}
