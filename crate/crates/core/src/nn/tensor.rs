use crate::error::{Error, Result};
use crate::nn::Real;

/// Dense batch x height x width x channels array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(format!("tensor dims must be >= 1, got {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "tensor dims must be >= 1");
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// A `(n, 1, 1, features)` tensor from row-major `(n, features)` data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new([rows, 1, 1, cols], data)
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let [n, h, w, c] = shape;
        let mut data = Vec::with_capacity(n * h * w * c);
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        data.push(f([b, y, x, ch]));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn height(&self) -> usize {
        self.shape[1]
    }

    pub fn width(&self) -> usize {
        self.shape[2]
    }

    pub fn channels(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn index(&self, [b, y, x, c]: [usize; 4]) -> usize {
        ((b * self.shape[1] + y) * self.shape[2] + x) * self.shape[3] + c
    }

    pub fn at(&self, idx: [usize; 4]) -> T {
        self.data[self.index(idx)]
    }

    pub fn item(&self, b: usize) -> &[T] {
        let len = self.item_len();
        &self.data[b * len..(b + 1) * len]
    }

    /// Same data viewed with a different shape of equal length.
    pub fn reshaped(self, shape: [usize; 4]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Flattens every item to `(n, 1, 1, h*w*c)`.
    pub fn flattened(self) -> Self {
        let n = self.shape[0];
        let f = self.item_len();
        Tensor {
            shape: [n, 1, 1, f],
            data: self.data,
        }
    }

    /// Stacks single items (batch 1 each, or any batch) along the batch axis.
    pub fn concat(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("cannot concatenate zero tensors"))?;
        let [_, h, w, c] = first.shape;
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != [h, w, c] {
                return Err(Error::shape(format!(
                    "cannot concatenate {:?} with {:?}",
                    p.shape, first.shape
                )));
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: [n, h, w, c],
            data,
        })
    }

    /// Selects batch items in the given order.
    pub fn select(&self, items: &[usize]) -> Self {
        let len = self.item_len();
        let mut data = Vec::with_capacity(items.len() * len);
        for &b in items {
            data.extend_from_slice(self.item(b));
        }
        Tensor {
            shape: [items.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    pub(crate) fn debug_check_finite(&self, what: &str) {
        debug_assert!(self.is_finite(), "non-finite values after {what}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shape() {
        assert!(Tensor::<f32>::new([1, 2, 2, 1], vec![0.0; 3]).is_err());
        assert!(Tensor::<f32>::new([0, 2, 2, 1], vec![]).is_err());
        let t = Tensor::<f32>::from_fn([2, 2, 3, 2], |[b, y, x, c]| (b * 100 + y * 10 + x + c * 1000) as f32);
        assert_eq!(t.at([1, 1, 2, 1]), 1112.0);
        assert_eq!(t.data()[t.index([1, 0, 1, 0])], 101.0);
        assert_eq!(t.item(1).len(), 12);
    }

    #[test]
    fn select_and_concat() {
        let t = Tensor::<f64>::from_fn([3, 1, 1, 2], |[b, _, _, c]| (b * 2 + c) as f64);
        let s = t.select(&[2, 0]);
        assert_eq!(s.data(), &[4.0, 5.0, 0.0, 1.0]);
        let c = Tensor::concat(&[s.clone(), t.select(&[1])]).unwrap();
        assert_eq!(c.shape(), [3, 1, 1, 2]);
        assert_eq!(c.data(), &[4.0, 5.0, 0.0, 1.0, 2.0, 3.0]);
        assert!(Tensor::concat(&[s, Tensor::zeros([1, 2, 1, 1])]).is_err());
    }
}
