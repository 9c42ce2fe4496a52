//! Fully-connected layer on flattened inputs.

use crate::error::{Error, Result};
use crate::nn::real::{gemm, Trans};
use crate::nn::{Real, Tensor};

fn check<T: Real>(x: &Tensor<T>, w: &[T], b: &[T]) -> Result<(usize, usize, usize)> {
    let n = x.batch();
    let fan_in = x.item_len();
    let out = b.len();
    if w.len() != fan_in * out {
        return Err(Error::shape(format!(
            "dense weights have {} values, expected {fan_in}x{out}",
            w.len()
        )));
    }
    Ok((n, fan_in, out))
}

/// `y = x W + b` with `W` stored `(in, out)` row-major; `x` is flattened per item.
pub fn fc_forward<T: Real>(x: &Tensor<T>, w: &[T], b: &[T]) -> Result<Tensor<T>> {
    let (n, fan_in, out) = check(x, w, b)?;
    let mut y = Vec::with_capacity(n * out);
    for _ in 0..n {
        y.extend_from_slice(b);
    }
    gemm(Trans::No, Trans::No, n, out, fan_in, x.data(), w, T::one(), &mut y);
    let y = Tensor::matrix(n, out, y)?;
    y.debug_check_finite("fc_forward");
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    /// Same shape as the forward input (not flattened).
    pub grad_x: Tensor<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

pub fn fc_backward<T: Real>(x: &Tensor<T>, w: &[T], grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
    let out = grad_out.item_len();
    let (n, fan_in, _) = check(x, w, &vec![T::zero(); out])?;
    if grad_out.batch() != n {
        return Err(Error::shape("dense gradient batch mismatch"));
    }
    let g = grad_out.data();
    let mut grad_b = vec![T::zero(); out];
    for row in g.chunks_exact(out) {
        for (acc, &v) in grad_b.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut grad_w = vec![T::zero(); fan_in * out];
    gemm(Trans::Yes, Trans::No, fan_in, out, n, x.data(), g, T::zero(), &mut grad_w);
    let mut grad_x = vec![T::zero(); n * fan_in];
    gemm(Trans::No, Trans::Yes, n, fan_in, out, g, w, T::zero(), &mut grad_x);
    Ok(DenseGrads {
        grad_x: Tensor::new(x.shape(), grad_x)?,
        grad_w,
        grad_b,
    })
}
