//! Sine-transform (tau) preconditioner and circulant baselines.
//!
//! The tau preconditioner replaces every stiffness block by the tau-matrix
//! of its symmetric part and every mass block by itself (the mass stencil is
//! already a tau matrix). Everything is then diagonal in the multilevel sine
//! basis: `P = S_N Lambda S_N`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::coeffs::CoefficientTable;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::field::{map_lines_in_place, Field};
use crate::operators::{kron_sum_dense, mass_dense, CnFvOperator, Sign, DENSE_GUARD};
use crate::scalar::Scalar;
use crate::transforms::{sine_matrix, tensor_dst_in_place, SineTransformPlan};

/// Eigenvalues of `tridiag(1, 6, 1) / 8` in sine-basis order:
/// `(3 + cos(k pi / (n + 1))) / 4`, `k = 1..n`.
pub fn mass_eigenvalues<T: Scalar>(n: usize) -> Vec<T> {
    let w = T::PI() / T::of_usize(n + 1);
    (1..=n)
        .map(|k| (T::of(3.0) + (w * T::of_usize(k)).cos()) / T::of(4.0))
        .collect()
}

/// Eigenvalues of the tau matrix of `(T + T^T) / 2`,
/// `q_1 + (q_0 + q_2) cos(theta_k) + sum_{m=2}^{n-1} q_{m+1} cos(m theta_k)`.
pub fn tau_sym_eigenvalues<T: Scalar>(table: &CoefficientTable<T>) -> Vec<T> {
    tau_eigenvalues_from_q(table.q(), table.n())
}

/// Same as [`tau_sym_eigenvalues`] for the leading `n` points of a longer
/// table (`q.len() >= n + 1` or `n == 1`).
pub(crate) fn tau_eigenvalues_from_q<T: Scalar>(q: &[T], n: usize) -> Vec<T> {
    let half = T::of(0.5);
    // first column of the symmetric part
    let t = |m: usize| -> T {
        match m {
            0 => q[1],
            1 if n > 1 => half * (q[0] + q[2]),
            m if m < n => half * q[m + 1],
            _ => T::zero(),
        }
    };
    // sum_j (t_{j-1} - t_{j+1}) sin(j theta) = sin(theta) (t_0 + 2 sum_m t_m cos(m theta))
    let mut c: Vec<T> = (1..=n).map(|j| t(j - 1) - t(j + 1)).collect();
    let plan = SineTransformPlan::new(n).expect("n >= 1");
    let mut buf = Vec::new();
    plan.apply_in_place(&mut c, &mut buf);
    let w = T::PI() / T::of_usize(n + 1);
    c.iter()
        .enumerate()
        .map(|(k, &v)| v / (plan.scale() * (w * T::of_usize(k + 1)).sin()))
        .collect()
}

/// `P = S_N Lambda S_N` with a strictly positive eigen-tensor.
#[derive(Debug, Clone)]
pub struct TauPreconditioner<T: Scalar> {
    shape: Vec<usize>,
    plans: Vec<SineTransformPlan<T>>,
    lambda: Vec<T>,
    inv: Vec<T>,
    inv_sqrt: Vec<T>,
}

impl<T: Scalar> TauPreconditioner<T> {
    /// Builds the eigen-tensor
    /// `prod_i lA_i + sum_i eta_i (k_{i,+} + k_{i,-}) ltau_i prod_{j != i} lA_j`.
    pub fn assemble(op: &CnFvOperator<T>) -> Result<Self> {
        if op.sign() != Sign::Plus {
            return Err(Error::InvalidParameter(
                "preconditioner needs the left-hand operator".into(),
            ));
        }
        let shape = op.grid().shape().to_vec();
        let d = shape.len();
        let mass: Vec<Vec<T>> = shape.iter().map(|&n| mass_eigenvalues(n)).collect();
        let etas = op.etas();
        let ks = op.diffusivities();
        let stiff: Vec<Vec<T>> = (0..d)
            .map(|i| {
                let w = etas[i] * (ks[i].plus + ks[i].minus);
                tau_eigenvalues_from_q(op.coefficient_table(i).q(), shape[i])
                    .into_iter()
                    .map(|v| w * v)
                    .collect()
            })
            .collect();
        let lambda = Field::from_fn(&shape, |idx| {
            let mut total = T::one();
            for a in 0..d {
                total *= mass[a][idx[a]];
            }
            for i in 0..d {
                let mut p = stiff[i][idx[i]];
                for a in (0..d).filter(|&a| a != i) {
                    p *= mass[a][idx[a]];
                }
                total += p;
            }
            total
        });
        Self::from_eigen_tensor(&shape, lambda.into_vec())
    }

    /// Preconditioner with a prescribed eigen-tensor (x-fastest).
    pub fn from_eigen_tensor(shape: &[usize], lambda: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if lambda.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: lambda.len(),
            });
        }
        if let Some((index, v)) = lambda.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
            return Err(Error::PreconditionerBreakdown {
                index,
                magnitude: v.as_f64(),
            });
        }
        let mut planner = FftPlanner::new();
        let plans = shape
            .iter()
            .map(|&n| SineTransformPlan::with_planner(n, &mut planner))
            .collect::<Result<Vec<_>>>()?;
        let inv = lambda.iter().map(|&v| v.recip()).collect();
        let inv_sqrt = lambda.iter().map(|&v| v.sqrt().recip()).collect();
        Ok(Self {
            shape: shape.to_vec(),
            plans,
            lambda,
            inv,
            inv_sqrt,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn eigen_tensor(&self) -> &[T] {
        &self.lambda
    }

    pub fn min_eigenvalue(&self) -> T {
        self.lambda.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max_eigenvalue(&self) -> T {
        self.lambda.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    fn diagonal_sandwich(&self, diag: &[T], x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
        tensor_dst_in_place(&self.plans, y);
        for (v, &s) in y.iter_mut().zip(diag) {
            *v *= s;
        }
        tensor_dst_in_place(&self.plans, y);
    }

    /// `y = P^{-1} x`.
    pub fn apply_inverse_into(&self, x: &[T], y: &mut [T]) {
        self.diagonal_sandwich(&self.inv, x, y);
    }

    /// `y = P^{-1/2} x` with the symmetric square root `S_N Lambda^{-1/2} S_N`.
    pub fn apply_inverse_sqrt_into(&self, x: &[T], y: &mut [T]) {
        self.diagonal_sandwich(&self.inv_sqrt, x, y);
    }

    /// `y = P x`.
    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        self.diagonal_sandwich(&self.lambda, x, y);
    }

    pub fn apply_inverse(&self, r: &Field<T>) -> Result<Field<T>> {
        r.check_shape(&self.shape)?;
        let mut out = Field::zeros(&self.shape);
        self.apply_inverse_into(r.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn apply_inverse_sqrt(&self, r: &Field<T>) -> Result<Field<T>> {
        r.check_shape(&self.shape)?;
        let mut out = Field::zeros(&self.shape);
        self.apply_inverse_sqrt_into(r.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Dense `S_N f(Lambda) S_N`.
    fn dense_function(&self, f: impl Fn(T) -> T) -> Result<DenseMatrix<T>> {
        let n = self.len();
        if n > DENSE_GUARD {
            return Err(Error::SizeGuard {
                size: n,
                limit: DENSE_GUARD,
            });
        }
        let s = DenseMatrix::kron_axes(&self.shape.iter().map(|&m| sine_matrix(m)).collect::<Vec<_>>());
        let d: Vec<T> = self.lambda.iter().map(|&v| f(v)).collect();
        let sd = DenseMatrix::from_fn(n, n, |i, j| s[(i, j)] * d[j]);
        Ok(sd.matmul(&s))
    }

    pub fn dense_matrix(&self) -> Result<DenseMatrix<T>> {
        self.dense_function(|v| v)
    }

    pub fn dense_inverse_sqrt(&self) -> Result<DenseMatrix<T>> {
        self.dense_function(|v| v.sqrt().recip())
    }
}

/// Circulant approximation rule for a Toeplitz matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CirculantKind {
    /// Copies the central diagonals and wraps them around.
    Strang,
    /// Frobenius-optimal: wrapped diagonals averaged with weights.
    Chan,
}

/// Toeplitz diagonal `t_k = M[i + k, i]` for `-n < k < n`.
fn diag<T: Scalar>(column: &[T], row: &[T], k: isize) -> T {
    if k >= 0 {
        column[k as usize]
    } else {
        row[(-k) as usize]
    }
}

/// First column of the Strang circulant of the Toeplitz matrix with the given
/// first column and row.
pub fn strang_first_column<T: Scalar>(column: &[T], row: &[T]) -> Vec<T> {
    let n = column.len() as isize;
    (0..n)
        .map(|k| if k <= n / 2 { diag(column, row, k) } else { diag(column, row, k - n) })
        .collect()
}

/// First column of T. Chan's optimal circulant:
/// `c_k = ((n - k) t_k + k t_{k-n}) / n`.
pub fn chan_first_column<T: Scalar>(column: &[T], row: &[T]) -> Vec<T> {
    let n = column.len() as isize;
    let nf = T::of(n as f64);
    (0..n)
        .map(|k| {
            let wrapped = if k > 0 { T::of(k as f64) * diag(column, row, k - n) } else { T::zero() };
            (T::of((n - k) as f64) * diag(column, row, k) + wrapped) / nf
        })
        .collect()
}

fn circulant_column<T: Scalar>(kind: CirculantKind, column: &[T], row: &[T]) -> Vec<T> {
    match kind {
        CirculantKind::Strang => strang_first_column(column, row),
        CirculantKind::Chan => chan_first_column(column, row),
    }
}

/// Dense circulant from its first column.
pub fn circulant_dense<T: Scalar>(c: &[T]) -> DenseMatrix<T> {
    let n = c.len();
    DenseMatrix::from_fn(n, n, |i, j| c[(i + n - j) % n])
}

/// Magnitude below which a circulant eigenvalue counts as a breakdown.
const BREAKDOWN: f64 = 1e-14;

/// Preconditioner obtained by replacing every Toeplitz factor of the operator
/// (mass and stiffness) by a circulant; inverted with per-axis FFTs.
#[derive(Clone)]
pub struct CirculantPreconditioner<T: Scalar> {
    kind: CirculantKind,
    shape: Vec<usize>,
    mass_columns: Vec<Vec<T>>,
    stiff_columns: Vec<Vec<T>>,
    etas: Vec<T>,
    ks: Vec<(T, T)>,
    eig: Vec<Complex<T>>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Scalar> std::fmt::Debug for CirculantPreconditioner<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantPreconditioner")
            .field("kind", &self.kind)
            .field("shape", &self.shape)
            .finish()
    }
}

impl<T: Scalar> CirculantPreconditioner<T> {
    pub fn assemble(op: &CnFvOperator<T>, kind: CirculantKind) -> Result<Self> {
        if op.sign() != Sign::Plus {
            return Err(Error::InvalidParameter(
                "preconditioner needs the left-hand operator".into(),
            ));
        }
        let shape = op.grid().shape().to_vec();
        let d = shape.len();
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let eig_of = |axis: usize, c: &[T]| -> Vec<Complex<T>> {
            let mut v: Vec<Complex<T>> = c.iter().map(|&x| Complex::new(x, T::zero())).collect();
            forward[axis].process(&mut v);
            v
        };
        let mut mass_columns = Vec::with_capacity(d);
        let mut stiff_columns = Vec::with_capacity(d);
        let mut mass_eig = Vec::with_capacity(d);
        let mut stiff_eig = Vec::with_capacity(d);
        let etas = op.etas();
        let ks: Vec<(T, T)> = op.diffusivities().iter().map(|k| (k.plus, k.minus)).collect();
        for axis in 0..d {
            let n = shape[axis];
            let m = mass_dense::<T>(n);
            let mcol: Vec<T> = (0..n).map(|i| m[(i, 0)]).collect();
            let mc = circulant_column(kind, &mcol, &mcol);
            let t = op.toeplitz(axis);
            let tc = circulant_column(kind, t.first_column(), t.first_row());
            mass_eig.push(eig_of(axis, &mc));
            // the transposed circulant has the conjugate spectrum
            let (kp, km) = ks[axis];
            stiff_eig.push(
                eig_of(axis, &tc)
                    .into_iter()
                    .map(|l| l.scale(kp) + l.conj().scale(km))
                    .collect::<Vec<_>>(),
            );
            mass_columns.push(mc);
            stiff_columns.push(tc);
        }
        let mut eig = Vec::with_capacity(op.len());
        let mut idx = vec![0usize; d];
        for _ in 0..op.len() {
            let mut total = Complex::new(T::one(), T::zero());
            for a in 0..d {
                total *= mass_eig[a][idx[a]];
            }
            for i in 0..d {
                let mut p = stiff_eig[i][idx[i]].scale(etas[i]);
                for a in (0..d).filter(|&a| a != i) {
                    p *= mass_eig[a][idx[a]];
                }
                total += p;
            }
            eig.push(total);
            for (i, &n) in idx.iter_mut().zip(&shape) {
                *i += 1;
                if *i < n {
                    break;
                }
                *i = 0;
            }
        }
        if let Some((index, v)) = eig
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.norm() >= T::of(BREAKDOWN)))
        {
            return Err(Error::PreconditionerBreakdown {
                index,
                magnitude: v.norm().as_f64(),
            });
        }
        Ok(Self {
            kind,
            shape,
            mass_columns,
            stiff_columns,
            etas,
            ks,
            eig,
            forward,
            inverse,
        })
    }

    pub fn kind(&self) -> CirculantKind {
        self.kind
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.eig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eig.is_empty()
    }

    /// Complex eigen-tensor in FFT order, x-fastest.
    pub fn eigen_tensor(&self) -> &[Complex<T>] {
        &self.eig
    }

    /// Returns `P^{-1} x` and the largest imaginary part dropped from the
    /// complex result.
    pub(crate) fn apply_inverse_checked(&self, x: &[T], y: &mut [T]) -> T {
        let mut data: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let mut scratch = Vec::new();
        for (axis, fft) in self.forward.iter().enumerate() {
            map_lines_in_place(&self.shape, axis, &mut data, |line| {
                scratch.resize(fft.get_inplace_scratch_len(), Complex::default());
                fft.process_with_scratch(line, &mut scratch)
            });
        }
        for (v, l) in data.iter_mut().zip(&self.eig) {
            *v = *v / *l;
        }
        for (axis, fft) in self.inverse.iter().enumerate() {
            map_lines_in_place(&self.shape, axis, &mut data, |line| {
                scratch.resize(fft.get_inplace_scratch_len(), Complex::default());
                fft.process_with_scratch(line, &mut scratch)
            });
        }
        let inv_n = T::one() / T::of_usize(self.len());
        let mut imag = T::zero();
        for (o, v) in y.iter_mut().zip(&data) {
            *o = v.re * inv_n;
            imag = imag.max((v.im * inv_n).abs());
        }
        imag
    }

    pub fn apply_inverse_into(&self, x: &[T], y: &mut [T]) {
        let imag = self.apply_inverse_checked(x, y);
        debug_assert!(
            imag <= T::of(1e-10) * crate::scalar::norm2(y).max(T::min_positive_value()),
            "circulant inverse left an imaginary part of {imag}"
        );
    }

    pub fn apply_inverse(&self, r: &Field<T>) -> Result<Field<T>> {
        r.check_shape(&self.shape)?;
        let mut out = Field::zeros(&self.shape);
        self.apply_inverse_into(r.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Dense circulant-substituted matrix.
    pub fn dense_matrix(&self) -> Result<DenseMatrix<T>> {
        let n = self.len();
        if n > DENSE_GUARD {
            return Err(Error::SizeGuard {
                size: n,
                limit: DENSE_GUARD,
            });
        }
        let masses: Vec<_> = self.mass_columns.iter().map(|c| circulant_dense(c)).collect();
        let stiff: Vec<_> = self
            .stiff_columns
            .iter()
            .zip(&self.ks)
            .map(|(c, &(kp, km))| {
                let m = circulant_dense(c);
                m.scaled(kp).add_scaled(km, &m.transpose())
            })
            .collect();
        Ok(kron_sum_dense(&self.shape, &masses, &stiff, &self.etas))
    }
}
