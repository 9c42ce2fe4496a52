use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl PoolGeometry {
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::invalid("pool kernel and stride must be >= 1"));
        }
        if self.padding >= self.kernel {
            return Err(Error::invalid(format!(
                "pool padding {} must be smaller than kernel {}",
                self.padding, self.kernel
            )));
        }
        let span = |len: usize| -> Result<usize> {
            let padded = len + 2 * self.padding;
            if padded < self.kernel {
                return Err(Error::shape(format!(
                    "pool kernel {} larger than padded input {padded}",
                    self.kernel
                )));
            }
            Ok((padded - self.kernel) / self.stride + 1)
        };
        Ok((span(h)?, span(w)?))
    }
}

/// Winning input positions of a max-pool forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndex {
    input_shape: [usize; 4],
    output_shape: [usize; 4],
    argmax: Vec<usize>,
}

impl PoolIndex {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    pub fn input_shape(&self) -> [usize; 4] {
        self.input_shape
    }
}

/// Max pooling; padded cells act as negative infinity and never win.
/// Ties go to the first position in row-major window order.
pub fn maxpool_forward<T: Real>(x: &Tensor<T>, g: &PoolGeometry) -> Result<(Tensor<T>, PoolIndex)> {
    let [n, h, w, c] = x.shape();
    let (oh, ow) = g.output_dims(h, w)?;
    let mut out = Tensor::zeros([n, oh, ow, c]);
    let mut argmax = vec![0usize; n * oh * ow * c];
    let data = x.data();
    let mut o = 0;
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for ky in 0..g.kernel {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..g.kernel {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let i = x.index([b, iy as usize, ix as usize, ch]);
                            if best_idx == usize::MAX || data[i] > best {
                                best = data[i];
                                best_idx = i;
                            }
                        }
                    }
                    debug_assert!(best_idx != usize::MAX, "window entirely in padding");
                    out.data_mut()[o] = best;
                    argmax[o] = best_idx;
                    o += 1;
                }
            }
        }
    }
    let index = PoolIndex {
        input_shape: x.shape(),
        output_shape: out.shape(),
        argmax,
    };
    Ok((out, index))
}

pub fn maxpool_backward<T: Real>(index: &PoolIndex, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.shape() != index.output_shape {
        return Err(Error::shape(format!(
            "pool gradient shape {:?}, expected {:?}",
            grad_out.shape(),
            index.output_shape
        )));
    }
    let mut grad_x = Tensor::zeros(index.input_shape);
    let gx = grad_x.data_mut();
    for (&i, &g) in index.argmax.iter().zip(grad_out.data()) {
        gx[i] += g;
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P2: PoolGeometry = PoolGeometry {
        kernel: 2,
        stride: 2,
        padding: 0,
    };

    #[test]
    fn constant_halves() {
        let x = Tensor::<f32>::filled([1, 6, 4, 3], 0.7);
        let (y, _) = maxpool_forward(&x, &P2).unwrap();
        assert_eq!(y.shape(), [1, 3, 2, 3]);
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn table_sizes() {
        assert_eq!(P2.output_dims(256, 256).unwrap(), (128, 128));
        let padded = PoolGeometry { padding: 1, ..P2 };
        assert_eq!(padded.output_dims(2, 2).unwrap(), (2, 2));
        assert!(PoolGeometry { padding: 2, ..P2 }.output_dims(4, 4).is_err());
    }

    #[test]
    fn padding_never_wins() {
        // All-negative input: a zero-filled pad would win, -inf must not.
        let x = Tensor::<f64>::from_fn([1, 2, 2, 1], |[_, y, x, _]| -1.0 - (y * 2 + x) as f64);
        let (y, idx) = maxpool_forward(&x, &PoolGeometry { padding: 1, ..P2 }).unwrap();
        assert_eq!(y.data(), &[-1.0, -2.0, -3.0, -4.0]);
        assert_eq!(idx.argmax(), &[0, 1, 2, 3]);
    }

    #[test]
    fn backward_routes_to_argmax() {
        let x = Tensor::<f64>::new([1, 2, 2, 1], vec![0.1, 0.9, 0.3, 0.2]).unwrap();
        let (_, idx) = maxpool_forward(&x, &P2).unwrap();
        let g = maxpool_backward(&idx, &Tensor::new([1, 1, 1, 1], vec![2.5]).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 2.5, 0.0, 0.0]);
        let z = maxpool_backward(&idx, &Tensor::<f32>::zeros([1, 1, 1, 1])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ties_go_to_first_scanned() {
        let x = Tensor::<f64>::filled([1, 2, 2, 1], 1.0);
        let (_, idx) = maxpool_forward(&x, &P2).unwrap();
        assert_eq!(idx.argmax(), &[0]);
    }
}
