//! Nodal tensors over the interior grid, stored x-fastest.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rank-d tensor of nodal values. Index `(i_1, .., i_d)` lives at
/// `i_1 + n_1 * (i_2 + n_2 * i_3)`: x first, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Evaluates `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut field = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for v in field.data.iter_mut() {
            *v = f(&idx);
            for (i, &n) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < n {
                    break;
                }
                *i = 0;
            }
        }
        field
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn norm2(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_shape(&self, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Stride of `axis` in the x-fastest layout.
pub(crate) fn axis_stride(shape: &[usize], axis: usize) -> usize {
    shape[..axis].iter().product()
}

/// Calls `op(line)` on every 1-D fibre of `data` along `axis`; the fibre is
/// written back afterwards.
pub(crate) fn map_lines_in_place<T: Copy + Default>(
    shape: &[usize],
    axis: usize,
    data: &mut [T],
    mut op: impl FnMut(&mut [T]),
) {
    let n = shape[axis];
    let stride = axis_stride(shape, axis);
    let outer = data.len() / (n * stride);
    let mut line = vec![T::default(); n];
    for o in 0..outer {
        let base = o * n * stride;
        for inner in 0..stride {
            let start = base + inner;
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[start + k * stride];
            }
            op(&mut line);
            for (k, &v) in line.iter().enumerate() {
                data[start + k * stride] = v;
            }
        }
    }
}
