//! Small convolutional networks with hand-written reverse-mode gradients.
//!
//! A network is a static graph of primitive ops ([`graph::Op`]) over
//! single-sample `C x H x W` tensors. Parameters live in a flat
//! [`ParamStore`] so the optimizer and checkpoints treat every
//! architecture alike. Everything is generic over [`Real`]: training runs
//! in `f32`, finite-difference checks in `f64`.

pub mod arch;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;

pub use arch::{build, Arch, ArchConfig, Network};
pub use graph::{Activations, Graph, Op};
pub use optim::{l1_loss, Adam, AdamConfig};

use num_traits::{Float, NumAssign};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type of network tensors.
pub trait Real: Float + NumAssign + Default + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static {
    const DTYPE: &'static str;

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `c = alpha * a b + beta * c` with explicit row/column strides.
    ///
    /// # Safety contract
    /// Callers pass slices long enough for the given shapes and strides;
    /// [`gemm`] checks lengths before calling this.
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn to_le_bytes_vec(values: &[Self]) -> Vec<u8>;

    fn from_le_bytes_slice(bytes: &[u8]) -> Vec<Self>;
}

macro_rules! impl_real {
    ($t:ty, $name:literal, $gemm:path, $bytes:literal) => {
        impl Real for $t {
            const DTYPE: &'static str = $name;

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                // SAFETY: `gemm` verified that every addressed element lies inside the slices.
                unsafe {
                    $gemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc)
                }
            }

            fn to_le_bytes_vec(values: &[Self]) -> Vec<u8> {
                values.iter().flat_map(|v| v.to_le_bytes()).collect()
            }

            fn from_le_bytes_slice(bytes: &[u8]) -> Vec<Self> {
                bytes
                    .chunks_exact($bytes)
                    .map(|c| <$t>::from_le_bytes(c.try_into().expect("chunk size")))
                    .collect()
            }
        }
    };
}

impl_real!(f32, "f32", matrixmultiply::sgemm, 4);
impl_real!(f64, "f64", matrixmultiply::dgemm, 8);

fn max_offset(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * rs.unsigned_abs() + (cols - 1) * cs.unsigned_abs()
}

/// Bounds-checked strided GEMM: `c (m x n) = alpha a (m x k) b (k x n) + beta c`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: (&[T], isize, isize),
    b: (&[T], isize, isize),
    beta: T,
    c: (&mut [T], isize, isize),
) {
    assert!(a.1 >= 0 && a.2 >= 0 && b.1 >= 0 && b.2 >= 0 && c.1 >= 0 && c.2 >= 0);
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(max_offset(m, k, a.1, a.2) < a.0.len(), "gemm: a too short");
        assert!(max_offset(k, n, b.1, b.2) < b.0.len(), "gemm: b too short");
    }
    assert!(max_offset(m, n, c.1, c.2) < c.0.len(), "gemm: c too short");
    T::gemm_raw(m, k, n, alpha, a.0, a.1, a.2, b.0, b.1, b.2, beta, c.0, c.1, c.2);
}

/// Single-sample activation tensor, `C x H x W` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::SizeMismatch {
                context: "tensor data",
                expected: c * h * w,
                actual: data.len(),
            });
        }
        Ok(Self { c, h, w, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.plane()..(c + 1) * self.plane()]
    }

    pub fn same_shape(&self, other: &Tensor<T>) -> bool {
        self.c == other.c && self.h == other.h && self.w == other.w
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

/// One named parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub data: Vec<T>,
}

/// All parameters of a network, in a fixed order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    pub tensors: Vec<ParamTensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn add(&mut self, name: String, shape: Vec<usize>) -> usize {
        let n = shape.iter().product();
        self.tensors.push(ParamTensor {
            name,
            shape,
            data: vec![T::zero(); n],
        });
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, i: usize) -> &[T] {
        &self.tensors[i].data
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.tensors[i].data
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Zero-filled store with the same layout, used for gradients.
    pub fn zeros_like(&self) -> ParamStore<T> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![T::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name.as_str())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// Network inputs and targets for one minibatch.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub inputs: Vec<Tensor<T>>,
    pub targets: Vec<Tensor<T>>,
}

impl<T: Real> Batch<T> {
    pub fn validate(&self, in_channels: usize, out_channels: usize) -> Result<()> {
        if self.inputs.is_empty() || self.inputs.len() != self.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "batch needs matching non-empty inputs/targets, got {} and {}",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            if x.c != in_channels || y.c != out_channels || x.h != y.h || x.w != y.w {
                return Err(Error::InvalidArgument("batch tensor shapes are inconsistent".into()));
            }
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite("batch tensors".into()));
            }
        }
        Ok(())
    }
}
