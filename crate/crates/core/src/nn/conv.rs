//! 2-D convolution (cross-correlation, no kernel flip) via per-item im2col.
//!
//! Weights are laid out `(kh, kw, c_in, c_out)` row-major, which makes the
//! im2col patch matrix `(oh*ow) x (kh*kw*c_in)` directly multipliable by the
//! weight matrix.

use crate::error::{Error, Result};
use crate::nn::real::{gemm, Trans};
use crate::nn::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kh: usize,
    pub kw: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn weight_len(&self) -> usize {
        self.kh * self.kw * self.c_in * self.c_out
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.c_in
    }

    /// Output spatial size; rejects strides that do not tile the padded input.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kh == 0 || self.kw == 0 || self.stride == 0 {
            return Err(Error::invalid("kernel and stride must be >= 1"));
        }
        let span = |len: usize, k: usize| -> Result<usize> {
            let padded = len + 2 * self.padding;
            if padded < k {
                return Err(Error::shape(format!(
                    "kernel {k} larger than padded input {padded}"
                )));
            }
            if !(padded - k).is_multiple_of(self.stride) {
                return Err(Error::shape(format!(
                    "stride {} does not tile padded input {padded} with kernel {k}",
                    self.stride
                )));
            }
            Ok((padded - k) / self.stride + 1)
        };
        Ok((span(h, self.kh)?, span(w, self.kw)?))
    }

    fn check(&self, x: &Tensor<impl Real>, w_len: usize, b_len: usize) -> Result<(usize, usize)> {
        if x.channels() != self.c_in {
            return Err(Error::shape(format!(
                "input has {} channels, kernel expects {}",
                x.channels(),
                self.c_in
            )));
        }
        if w_len != self.weight_len() {
            return Err(Error::shape(format!(
                "weights have {w_len} values, expected {}",
                self.weight_len()
            )));
        }
        if b_len != self.c_out {
            return Err(Error::shape(format!(
                "bias has {b_len} values, expected {}",
                self.c_out
            )));
        }
        self.output_dims(x.height(), x.width())
    }
}

fn im2col<T: Real>(item: &[T], h: usize, w: usize, g: &ConvGeometry, oh: usize, ow: usize, cols: &mut [T]) {
    let c = g.c_in;
    let k = g.patch_len();
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut cols[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
            for ky in 0..g.kh {
                let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                for kx in 0..g.kw {
                    let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                    let dst = &mut row[(ky * g.kw + kx) * c..(ky * g.kw + kx + 1) * c];
                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                        dst.fill(T::zero());
                    } else {
                        let src = (iy as usize * w + ix as usize) * c;
                        dst.copy_from_slice(&item[src..src + c]);
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], h: usize, w: usize, g: &ConvGeometry, oh: usize, ow: usize, item: &mut [T]) {
    let c = g.c_in;
    let k = g.patch_len();
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * k..(oy * ow + ox + 1) * k];
            for ky in 0..g.kh {
                let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..g.kw {
                    let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * c;
                    let src = &row[(ky * g.kw + kx) * c..(ky * g.kw + kx + 1) * c];
                    for (d, &s) in item[dst..dst + c].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Real>(x: &Tensor<T>, w: &[T], b: &[T], g: &ConvGeometry) -> Result<Tensor<T>> {
    let (oh, ow) = g.check(x, w.len(), b.len())?;
    let (n, h, wd) = (x.batch(), x.height(), x.width());
    let p = oh * ow;
    let k = g.patch_len();
    let mut out = Tensor::zeros([n, oh, ow, g.c_out]);
    let mut cols = vec![T::zero(); p * k];
    let out_len = p * g.c_out;
    for item in 0..n {
        im2col(x.item(item), h, wd, g, oh, ow, &mut cols);
        let y = &mut out.data_mut()[item * out_len..(item + 1) * out_len];
        for row in y.chunks_exact_mut(g.c_out) {
            row.copy_from_slice(b);
        }
        gemm(Trans::No, Trans::No, p, g.c_out, k, &cols, w, T::one(), y);
    }
    out.debug_check_finite("conv2d_forward");
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &[T],
    grad_out: &Tensor<T>,
    g: &ConvGeometry,
) -> Result<ConvGrads<T>> {
    let (oh, ow) = g.check(x, w.len(), g.c_out)?;
    if grad_out.shape() != [x.batch(), oh, ow, g.c_out] {
        return Err(Error::shape(format!(
            "gradient shape {:?} does not match forward output {:?}",
            grad_out.shape(),
            [x.batch(), oh, ow, g.c_out]
        )));
    }
    let (n, h, wd) = (x.batch(), x.height(), x.width());
    let p = oh * ow;
    let k = g.patch_len();
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = vec![T::zero(); g.weight_len()];
    let mut grad_b = vec![T::zero(); g.c_out];
    let mut cols = vec![T::zero(); p * k];
    let mut grad_cols = vec![T::zero(); p * k];
    let out_len = p * g.c_out;
    let in_len = x.item_len();
    for item in 0..n {
        let gy = &grad_out.data()[item * out_len..(item + 1) * out_len];
        for row in gy.chunks_exact(g.c_out) {
            for (acc, &v) in grad_b.iter_mut().zip(row) {
                *acc += v;
            }
        }
        im2col(x.item(item), h, wd, g, oh, ow, &mut cols);
        gemm(Trans::Yes, Trans::No, k, g.c_out, p, &cols, gy, T::one(), &mut grad_w);
        gemm(Trans::No, Trans::Yes, p, k, g.c_out, gy, w, T::zero(), &mut grad_cols);
        col2im(
            &grad_cols,
            h,
            wd,
            g,
            oh,
            ow,
            &mut grad_x.data_mut()[item * in_len..(item + 1) * in_len],
        );
    }
    Ok(ConvGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(c_in: usize, c_out: usize, stride: usize, padding: usize) -> ConvGeometry {
        ConvGeometry {
            kh: 3,
            kw: 3,
            c_in,
            c_out,
            stride,
            padding,
        }
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor::<f64>::from_fn([1, 5, 5, 1], |[_, y, x, _]| (y * 5 + x) as f64);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let g = geometry(1, 1, 1, 1);
        let y = conv2d_forward(&x, &w, &[0.0], &g).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn output_size_and_validation() {
        let g = geometry(1, 8, 1, 1);
        assert_eq!(g.output_dims(256, 256).unwrap(), (256, 256));
        let g2 = geometry(1, 1, 2, 0);
        assert!(g2.output_dims(6, 6).is_err()); // (6-3) % 2 != 0
        assert_eq!(g2.output_dims(7, 7).unwrap(), (3, 3));
        let x = Tensor::<f32>::zeros([1, 4, 4, 2]);
        assert!(conv2d_forward(&x, &[0.0; 9], &[0.0], &geometry(1, 1, 1, 1)).is_err());
        assert!(conv2d_forward(&x, &[0.0; 18], &[0.0, 0.0], &geometry(2, 1, 1, 1)).is_err());
    }

    #[test]
    fn zero_grad_gives_zero_gradients() {
        let x = Tensor::<f64>::from_fn([2, 4, 4, 2], |[b, y, x, c]| (b + y * x + c) as f64 * 0.1);
        let g = geometry(2, 3, 1, 1);
        let w: Vec<f64> = (0..g.weight_len()).map(|i| i as f64 * 0.01).collect();
        let grads = conv2d_backward(&x, &w, &Tensor::zeros([2, 4, 4, 3]), &g).unwrap();
        assert!(grads.grad_x.data().iter().all(|&v| v == 0.0));
        assert!(grads.grad_w.iter().all(|&v| v == 0.0));
        assert!(grads.grad_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_routes_single_pixel() {
        let x = Tensor::<f64>::zeros([1, 5, 5, 1]);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let mut gy = Tensor::<f64>::zeros([1, 5, 5, 1]);
        let i = gy.index([0, 2, 3, 0]);
        gy.data_mut()[i] = 1.5;
        let grads = conv2d_backward(&x, &w, &gy, &geometry(1, 1, 1, 1)).unwrap();
        assert_eq!(grads.grad_x, gy);
        assert_eq!(grads.grad_b, vec![1.5]);
    }
}
