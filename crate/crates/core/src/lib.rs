//! Simulation and reconstruction toolkit for accelerated radial multi-coil MRI
//! with a residual-to-residual DNN series.
//!
//! The crate is organized bottom-up: sampling [`trajectory`], the
//! non-uniform Fourier transforms in [`nufft`], density compensation in
//! [`dcomp`], the multi-coil measurement operator in [`coil`], data synthesis
//! in [`simulate`], the trainable modules in [`nn`], the series algorithm in
//! [`series`], and image quality metrics in [`metrics`].

// Negated float comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coil;
pub mod dcomp;
pub mod error;
pub mod export;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod nufft;
pub mod parallel;
pub mod rawio;
pub mod series;
pub mod simulate;
pub mod trajectory;

pub use error::{Error, Result};
pub use image::{ComplexImage, RealImage};
pub use nufft::{KSpaceData, NufftPlan};
pub use trajectory::Trajectory;
