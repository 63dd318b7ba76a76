//! Layer primitives with explicit forward caches and backward passes.
//!
//! Activations are `(channels, height, width)` arrays; fully-connected layers
//! see their input flattened and emit `(width, 1, 1)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::Rng as _;

use super::tensor::Tensor;
use super::Real;
use crate::rng::Rng;

/// 3x3 convolution, zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
}

impl<T: Real> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_channels, in_channels, 3, 3]),
            bias: Tensor::zeros(&[out_channels]),
            stride,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    fn weight_matrix(&self) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((self.out_channels(), self.in_channels() * 9), &self.weight.values).unwrap()
    }

    fn im2col(&self, x: &Array3<T>) -> Array2<T> {
        let (c, h, w) = x.dim();
        let (ho, wo) = self.out_hw(h, w);
        let s = self.stride;
        let mut cols = Array2::<T>::zeros((c * 9, ho * wo));
        let dst = cols.as_slice_mut().unwrap();
        let src = x.as_slice().unwrap();
        for ci in 0..c {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = (ci * 9 + ky * 3 + kx) * ho * wo;
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = ci * h * w + iy as usize * w;
                        let dst_row = row + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * s + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                dst[dst_row + ox] = src[src_row + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &Array2<T>, (c, h, w): (usize, usize, usize)) -> Array3<T> {
        let (ho, wo) = self.out_hw(h, w);
        let s = self.stride;
        let mut x = Array3::<T>::zeros((c, h, w));
        let dst = x.as_slice_mut().unwrap();
        let src = cols.as_slice().unwrap();
        for ci in 0..c {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = (ci * 9 + ky * 3 + kx) * ho * wo;
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst_row = ci * h * w + iy as usize * w;
                        let src_row = row + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * s + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                dst[dst_row + ix as usize] += src[src_row + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }

    /// Returns the output and the im2col matrix needed by `backward`.
    pub fn forward(&self, x: &Array3<T>) -> (Array3<T>, Array2<T>) {
        let (_, h, w) = x.dim();
        let (ho, wo) = self.out_hw(h, w);
        let cols = self.im2col(x);
        let mut out = self.weight_matrix().dot(&cols);
        for (mut row, &b) in out.rows_mut().into_iter().zip(&self.bias.values) {
            row.mapv_inplace(|v| v + b);
        }
        (out.into_shape_with_order((self.out_channels(), ho, wo)).unwrap(), cols)
    }

    /// Accumulates parameter gradients into `gw`/`gb`; returns the input
    /// gradient when `need_input_grad`.
    pub fn backward(
        &self,
        grad_out: &Array3<T>,
        cols: &Array2<T>,
        in_shape: (usize, usize, usize),
        gw: &mut [T],
        gb: &mut [T],
        need_input_grad: bool,
    ) -> Option<Array3<T>> {
        let (o, ho, wo) = grad_out.dim();
        let g = ArrayView2::from_shape((o, ho * wo), grad_out.as_slice().unwrap()).unwrap();
        let mut gw_m = ArrayViewMut2::from_shape((o, self.in_channels() * 9), gw).unwrap();
        general_mat_mul(T::one(), &g, &cols.t(), T::one(), &mut gw_m);
        for (b, row) in gb.iter_mut().zip(g.rows()) {
            *b += row.sum();
        }
        need_input_grad.then(|| {
            let dcols = self.weight_matrix().t().dot(&g);
            self.col2im(&dcols, in_shape)
        })
    }
}

/// Fully connected layer, weight `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        Self { weight: Tensor::zeros(&[n_out, n_in]), bias: Tensor::zeros(&[n_out]) }
    }

    pub fn n_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.shape[0]
    }

    fn weight_matrix(&self) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((self.n_out(), self.n_in()), &self.weight.values).unwrap()
    }

    pub fn forward(&self, x: ArrayView1<T>) -> Array1<T> {
        self.weight_matrix().dot(&x) + &ArrayView1::from(&self.bias.values)
    }

    pub fn backward(&self, grad_out: ArrayView1<T>, x: ArrayView1<T>, gw: &mut [T], gb: &mut [T]) -> Array1<T> {
        let n_in = self.n_in();
        for (o, &g) in grad_out.iter().enumerate() {
            gb[o] += g;
            let row = &mut gw[o * n_in..(o + 1) * n_in];
            for (w, &xi) in row.iter_mut().zip(x.iter()) {
                *w += g * xi;
            }
        }
        self.weight_matrix().t().dot(&grad_out)
    }
}

/// 2x2 max pooling, stride 2 (odd trailing rows/columns dropped). Returns the
/// output and the flat input index of each selected maximum.
pub fn maxpool_forward<T: Real>(x: &Array3<T>) -> (Array3<T>, Vec<usize>) {
    let (c, h, w) = x.dim();
    let (ho, wo) = (h / 2, w / 2);
    let src = x.as_slice().unwrap();
    let mut out = Array3::<T>::zeros((c, ho, wo));
    let mut arg = Vec::with_capacity(c * ho * wo);
    for (i, o) in out.iter_mut().enumerate() {
        let ci = i / (ho * wo);
        let oy = (i / wo) % ho;
        let ox = i % wo;
        let base = ci * h * w + 2 * oy * w + 2 * ox;
        let mut best = base;
        for idx in [base + 1, base + w, base + w + 1] {
            if src[idx] > src[best] {
                best = idx;
            }
        }
        *o = src[best];
        arg.push(best);
    }
    (out, arg)
}

pub fn maxpool_backward<T: Real>(grad_out: &Array3<T>, argmax: &[usize], in_shape: (usize, usize, usize)) -> Array3<T> {
    let mut gx = Array3::<T>::zeros(in_shape);
    let dst = gx.as_slice_mut().unwrap();
    for (&g, &idx) in grad_out.iter().zip(argmax) {
        dst[idx] += g;
    }
    gx
}

/// Mean over height and width, output `(c, 1, 1)`.
pub fn gap_forward<T: Real>(x: &Array3<T>) -> Array3<T> {
    let (c, h, w) = x.dim();
    let n = T::lit((h * w) as f64);
    Array3::from_shape_fn((c, 1, 1), |(ci, _, _)| x.index_axis(ndarray::Axis(0), ci).sum() / n)
}

pub fn gap_backward<T: Real>(grad_out: &Array3<T>, in_shape: (usize, usize, usize)) -> Array3<T> {
    let (c, h, w) = in_shape;
    let n = T::lit((h * w) as f64);
    Array3::from_shape_fn((c, h, w), |(ci, _, _)| grad_out[[ci, 0, 0]] / n)
}

pub fn relu_forward<T: Real>(x: &Array3<T>) -> Array3<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// `out` is the forward output; the gradient passes where it is positive.
pub fn relu_backward<T: Real>(grad_out: &Array3<T>, out: &Array3<T>) -> Array3<T> {
    let mut g = grad_out.clone();
    g.zip_mut_with(out, |gv, &o| {
        if o <= T::zero() {
            *gv = T::zero();
        }
    });
    g
}

/// Inverted dropout mask: each unit kept with probability `1 - rate` and
/// scaled by `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(n: usize, rate: f64, rng: &mut Rng) -> Vec<T> {
    if rate <= 0.0 {
        return vec![T::one(); n];
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..n).map(|_| if rng.random::<f64>() >= rate { keep } else { T::zero() }).collect()
}
