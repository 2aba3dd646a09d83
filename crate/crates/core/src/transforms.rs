//! Type-I discrete sine transform.
//!
//! `S_n[j, k] = sqrt(2 / (n + 1)) sin(j k pi / (n + 1))` for `1 <= j, k <= n`.
//! The matrix is symmetric and orthogonal, so it is its own inverse. The fast
//! path odd-extends the input to length `2 (n + 1)` and runs one complex FFT.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{map_lines_in_place, Field};
use crate::scalar::Scalar;

#[derive(Clone)]
pub struct SineTransformPlan<T: Scalar> {
    n: usize,
    scale: T,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for SineTransformPlan<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransformPlan")
            .field("n", &self.n)
            .field("scale", &self.scale)
            .finish()
    }
}

impl<T: Scalar> SineTransformPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        let mut planner = FftPlanner::new();
        Self::with_planner(n, &mut planner)
    }

    pub fn with_planner(n: usize, planner: &mut FftPlanner<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewPoints { n, min: 1 });
        }
        Ok(Self {
            n,
            scale: (T::of(2.0) / T::of_usize(n + 1)).sqrt(),
            fft: planner.plan_fft_forward(2 * (n + 1)),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalization factor `sqrt(2 / (n + 1))`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// Returns `S_n x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut out = x.to_vec();
        let mut buf = Vec::new();
        self.apply_in_place(&mut out, &mut buf);
        Ok(out)
    }

    /// Overwrites `x` (length `n`) with `S_n x`. `buf` is resized as needed.
    pub(crate) fn apply_in_place(&self, x: &mut [T], buf: &mut Vec<Complex<T>>) {
        debug_assert_eq!(x.len(), self.n);
        let m = 2 * (self.n + 1);
        buf.clear();
        buf.resize(m + self.fft.get_inplace_scratch_len(), Complex::default());
        let (data, scratch) = buf.split_at_mut(m);
        // [0, x_1..x_n, 0, -x_n..-x_1]
        for (j, &v) in x.iter().enumerate() {
            data[j + 1] = Complex::new(v, T::zero());
            data[m - 1 - j] = Complex::new(-v, T::zero());
        }
        self.fft.process_with_scratch(data, scratch);
        // FFT_k = -2i sum_j x_j sin(pi j k / (n + 1))
        let factor = self.scale * T::of(0.5);
        for (k, v) in x.iter_mut().enumerate() {
            *v = -data[k + 1].im * factor;
        }
    }
}

/// Applies `S_{n_i}` along every axis, x then y then z. Equals
/// `(S_{n_d} (x) ... (x) S_{n_1}) vec(u)`.
pub fn tensor_dst_apply<T: Scalar>(plans: &[SineTransformPlan<T>], u: &Field<T>) -> Result<Field<T>> {
    let shape: Vec<usize> = plans.iter().map(|p| p.n).collect();
    u.check_shape(&shape)?;
    let mut out = u.clone();
    tensor_dst_in_place(plans, out.as_mut_slice());
    Ok(out)
}

pub(crate) fn tensor_dst_in_place<T: Scalar>(plans: &[SineTransformPlan<T>], data: &mut [T]) {
    let shape: Vec<usize> = plans.iter().map(|p| p.n).collect();
    let mut buf = Vec::new();
    for (axis, plan) in plans.iter().enumerate() {
        map_lines_in_place(&shape, axis, data, |line| plan.apply_in_place(line, &mut buf));
    }
}

/// Dense `S_n`, for oracles.
pub fn sine_matrix<T: Scalar>(n: usize) -> crate::dense::DenseMatrix<T> {
    let scale = (T::of(2.0) / T::of_usize(n + 1)).sqrt();
    let w = T::PI() / T::of_usize(n + 1);
    crate::dense::DenseMatrix::from_fn(n, n, |j, k| scale * (w * T::of_usize((j + 1) * (k + 1))).sin())
}
