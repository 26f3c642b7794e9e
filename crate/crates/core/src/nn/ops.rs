//! Primitive layers with their vector-Jacobian products.
//!
//! Weight layouts:
//! - `conv3x3`: `[cout, cin, 3, 3]`, zero padding 1
//! - `conv1x1`: `[cout, cin]`
//! - `conv_transpose2x2`: `[cin, cout, 2, 2]`, stride 2
//!
//! Backward functions accumulate into the weight and bias gradients and
//! return the input gradient.

use super::{gemm, Real, Tensor};

fn im2col<T: Real>(x: &Tensor<T>) -> Vec<T> {
    let (h, w) = (x.h, x.w);
    let hw = h * w;
    let mut col = vec![T::zero(); x.c * 9 * hw];
    for ci in 0..x.c {
        let src = x.channel(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for i in 0..h {
                    let si = i as isize + ky as isize - 1;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let srow = &src[si as usize * w..][..w];
                    let drow = &mut row[i * w..][..w];
                    match kx {
                        0 => drow[1..].copy_from_slice(&srow[..w - 1]),
                        1 => drow.copy_from_slice(srow),
                        _ => drow[..w - 1].copy_from_slice(&srow[1..]),
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize) -> Tensor<T> {
    let hw = h * w;
    let mut x = Tensor::zeros(c, h, w);
    for ci in 0..c {
        let dst = &mut x.data[ci * hw..][..hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for i in 0..h {
                    let si = i as isize + ky as isize - 1;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[si as usize * w..][..w];
                    let srow = &row[i * w..][..w];
                    match kx {
                        0 => drow[..w - 1].iter_mut().zip(&srow[1..]).for_each(|(d, &s)| *d += s),
                        1 => drow.iter_mut().zip(srow).for_each(|(d, &s)| *d += s),
                        _ => drow[1..].iter_mut().zip(&srow[..w - 1]).for_each(|(d, &s)| *d += s),
                    }
                }
            }
        }
    }
    x
}

fn add_bias<T: Real>(y: &mut Tensor<T>, b: &[T]) {
    let hw = y.plane();
    for (chunk, &bv) in y.data.chunks_exact_mut(hw).zip(b) {
        chunk.iter_mut().for_each(|v| *v += bv);
    }
}

fn accumulate_bias_grad<T: Real>(dy: &Tensor<T>, db: &mut [T]) {
    for (chunk, g) in dy.data.chunks_exact(dy.plane()).zip(db.iter_mut()) {
        *g += chunk.iter().copied().sum::<T>();
    }
}

pub fn conv3x3_forward<T: Real>(x: &Tensor<T>, w: &[T], b: &[T], cout: usize) -> Tensor<T> {
    let k = x.c * 9;
    let hw = x.plane();
    assert_eq!(w.len(), cout * k);
    let col = im2col(x);
    let mut y = Tensor::zeros(cout, x.h, x.w);
    gemm(cout, k, hw, T::one(), (w, k as isize, 1), (&col, hw as isize, 1), T::zero(), (&mut y.data, hw as isize, 1));
    add_bias(&mut y, b);
    y
}

pub fn conv3x3_backward<T: Real>(x: &Tensor<T>, w: &[T], dy: &Tensor<T>, dw: &mut [T], db: &mut [T]) -> Tensor<T> {
    let k = x.c * 9;
    let hw = x.plane();
    let cout = dy.c;
    let col = im2col(x);
    // dW += dY colᵀ
    gemm(cout, hw, k, T::one(), (&dy.data, hw as isize, 1), (&col, 1, hw as isize), T::one(), (dw, k as isize, 1));
    accumulate_bias_grad(dy, db);
    // dcol = Wᵀ dY
    let mut dcol = vec![T::zero(); k * hw];
    gemm(k, cout, hw, T::one(), (w, 1, k as isize), (&dy.data, hw as isize, 1), T::zero(), (&mut dcol, hw as isize, 1));
    col2im(&dcol, x.c, x.h, x.w)
}

pub fn conv1x1_forward<T: Real>(x: &Tensor<T>, w: &[T], b: &[T], cout: usize) -> Tensor<T> {
    let hw = x.plane();
    assert_eq!(w.len(), cout * x.c);
    let mut y = Tensor::zeros(cout, x.h, x.w);
    gemm(cout, x.c, hw, T::one(), (w, x.c as isize, 1), (&x.data, hw as isize, 1), T::zero(), (&mut y.data, hw as isize, 1));
    add_bias(&mut y, b);
    y
}

pub fn conv1x1_backward<T: Real>(x: &Tensor<T>, w: &[T], dy: &Tensor<T>, dw: &mut [T], db: &mut [T]) -> Tensor<T> {
    let hw = x.plane();
    let (cin, cout) = (x.c, dy.c);
    gemm(cout, hw, cin, T::one(), (&dy.data, hw as isize, 1), (&x.data, 1, hw as isize), T::one(), (dw, cin as isize, 1));
    accumulate_bias_grad(dy, db);
    let mut dx = Tensor::zeros(cin, x.h, x.w);
    gemm(cin, cout, hw, T::one(), (w, 1, cin as isize), (&dy.data, hw as isize, 1), T::zero(), (&mut dx.data, hw as isize, 1));
    dx
}

pub fn conv_transpose2x2_forward<T: Real>(x: &Tensor<T>, w: &[T], b: &[T], cout: usize) -> Tensor<T> {
    let hw = x.plane();
    let m = cout * 4;
    assert_eq!(w.len(), x.c * m);
    // Y_g [cout*4, hw] = Wᵀ X
    let mut yg = vec![T::zero(); m * hw];
    gemm(m, x.c, hw, T::one(), (w, 1, m as isize), (&x.data, hw as isize, 1), T::zero(), (&mut yg, hw as isize, 1));
    let (h2, w2) = (2 * x.h, 2 * x.w);
    let mut y = Tensor::zeros(cout, h2, w2);
    for co in 0..cout {
        for ky in 0..2 {
            for kx in 0..2 {
                let src = &yg[(co * 4 + ky * 2 + kx) * hw..][..hw];
                for i in 0..x.h {
                    let drow = &mut y.data[(co * h2 + 2 * i + ky) * w2..][..w2];
                    for j in 0..x.w {
                        drow[2 * j + kx] = src[i * x.w + j] + b[co];
                    }
                }
            }
        }
    }
    y
}

pub fn conv_transpose2x2_backward<T: Real>(x: &Tensor<T>, w: &[T], dy: &Tensor<T>, dw: &mut [T], db: &mut [T]) -> Tensor<T> {
    let hw = x.plane();
    let cout = dy.c;
    let m = cout * 4;
    let mut dyg = vec![T::zero(); m * hw];
    for co in 0..cout {
        for ky in 0..2 {
            for kx in 0..2 {
                let dst = &mut dyg[(co * 4 + ky * 2 + kx) * hw..][..hw];
                for i in 0..x.h {
                    let srow = &dy.data[(co * dy.h + 2 * i + ky) * dy.w..][..dy.w];
                    for j in 0..x.w {
                        dst[i * x.w + j] = srow[2 * j + kx];
                    }
                }
            }
        }
    }
    accumulate_bias_grad(dy, db);
    // dW [cin, m] += X dY_gᵀ
    gemm(x.c, hw, m, T::one(), (&x.data, hw as isize, 1), (&dyg, 1, hw as isize), T::one(), (dw, m as isize, 1));
    let mut dx = Tensor::zeros(x.c, x.h, x.w);
    gemm(x.c, m, hw, T::one(), (w, m as isize, 1), (&dyg, hw as isize, 1), T::zero(), (&mut dx.data, hw as isize, 1));
    dx
}

pub fn avg_pool2_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (h2, w2) = (x.h / 2, x.w / 2);
    let quarter = T::from_f64(0.25);
    let mut y = Tensor::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let src = x.channel(c);
        for i in 0..h2 {
            for j in 0..w2 {
                let a = 2 * i * x.w + 2 * j;
                y.data[(c * h2 + i) * w2 + j] = (src[a] + src[a + 1] + src[a + x.w] + src[a + x.w + 1]) * quarter;
            }
        }
    }
    y
}

pub fn avg_pool2_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (dy.h * 2, dy.w * 2);
    let quarter = T::from_f64(0.25);
    let mut dx = Tensor::zeros(dy.c, h, w);
    for c in 0..dy.c {
        for i in 0..h {
            for j in 0..w {
                dx.data[(c * h + i) * w + j] = dy.data[(c * dy.h + i / 2) * dy.w + j / 2] * quarter;
            }
        }
    }
    dx
}

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    Tensor {
        data: x.data.iter().map(|&v| v.max(T::zero())).collect(),
        ..*x
    }
}

/// Uses the forward output as the mask (subgradient 0 at the kink).
pub fn relu_backward<T: Real>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    Tensor {
        data: y.data.iter().zip(&dy.data).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect(),
        ..*dy
    }
}

pub fn concat_forward<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert!(a.h == b.h && a.w == b.w, "concat spatial mismatch");
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor {
        c: a.c + b.c,
        h: a.h,
        w: a.w,
        data,
    }
}

pub fn concat_backward<T: Real>(ca: usize, dy: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let split = ca * dy.plane();
    (
        Tensor {
            c: ca,
            h: dy.h,
            w: dy.w,
            data: dy.data[..split].to_vec(),
        },
        Tensor {
            c: dy.c - ca,
            h: dy.h,
            w: dy.w,
            data: dy.data[split..].to_vec(),
        },
    )
}

pub fn add_forward<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert!(a.same_shape(b), "add shape mismatch");
    Tensor {
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect(),
        ..*a
    }
}
