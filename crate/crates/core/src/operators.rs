//! Matrix-free structured operators of the Crank-Nicolson finite-volume scheme.
//!
//! The left-hand matrix is
//! `A = A_N + sum_i eta_i (A_{n_d} (x) .. B_i .. (x) A_{n_1})` with the
//! stiffness `B_i = k_{i,+} T_i + k_{i,-} T_i^T` on axis `i` and the mass
//! stencil `A_n = tridiag(1, 6, 1) / 8` everywhere else.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::coeffs::{CoefficientTable, FractionalOrder};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::field::{map_lines_in_place, Field};
use crate::scalar::Scalar;

/// Largest `N` for which a dense materialization is allowed.
pub const DENSE_GUARD: usize = 4096;

/// Uniform interior grid on a box, `n_i` unknowns per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    bounds: Vec<(T, T)>,
    n: Vec<usize>,
    h: Vec<T>,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(bounds: &[(T, T)], n: &[usize]) -> Result<Self> {
        if bounds.len() != n.len() {
            return Err(Error::InvalidGrid(format!(
                "{} bounds for {} axes",
                bounds.len(),
                n.len()
            )));
        }
        if !(2..=3).contains(&n.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension {} is not 2 or 3",
                n.len()
            )));
        }
        if let Some(&bad) = n.iter().find(|&&v| v == 0) {
            return Err(Error::TooFewPoints { n: bad, min: 1 });
        }
        let mut h = Vec::with_capacity(n.len());
        for (&(a, b), &ni) in bounds.iter().zip(n) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!("empty interval ({a}, {b})")));
            }
            h.push((b - a) / T::of_usize(ni + 1));
        }
        Ok(Self {
            bounds: bounds.to_vec(),
            n: n.to_vec(),
            h,
        })
    }

    /// Unit box `(0, 1)^d`.
    pub fn unit(n: &[usize]) -> Result<Self> {
        Self::new(&vec![(T::zero(), T::one()); n.len()], n)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn steps(&self) -> &[T] {
        &self.h
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    /// Total unknowns `N`.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of interior node `i` (0-based) on `axis`.
    pub fn node(&self, axis: usize, i: usize) -> T {
        self.bounds[axis].0 + T::of_usize(i + 1) * self.h[axis]
    }

    /// Product of the steps, the volume of one cell.
    pub fn cell_volume(&self) -> T {
        self.h.iter().fold(T::one(), |p, &h| p * h)
    }
}

/// `(x_{i-1} + 6 x_i + x_{i+1}) / 8` with zero boundary.
pub fn mass_matvec<T: Scalar>(n: usize, x: &[T]) -> Result<Vec<T>> {
    if x.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: x.len(),
        });
    }
    let mut y = x.to_vec();
    mass_in_place(&mut y);
    Ok(y)
}

fn mass_in_place<T: Scalar>(x: &mut [T]) {
    let six = T::of(6.0);
    let eighth = T::of(0.125);
    let mut prev = T::zero();
    let n = x.len();
    for i in 0..n {
        let cur = x[i];
        let next = if i + 1 < n { x[i + 1] } else { T::zero() };
        x[i] = (prev + six * cur + next) * eighth;
        prev = cur;
    }
}

/// Dense `tridiag(1, 6, 1) / 8`.
pub fn mass_dense<T: Scalar>(n: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => T::of(0.75),
        1 => T::of(0.125),
        _ => T::zero(),
    })
}

/// Non-symmetric Toeplitz matrix applied through a zero-padded circulant of
/// power-of-two size at least `2n`.
#[derive(Clone)]
pub struct ToeplitzOperator<T: Scalar> {
    n: usize,
    first_column: Vec<T>,
    first_row: Vec<T>,
    symbol: Vec<Complex<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for ToeplitzOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzOperator")
            .field("n", &self.n)
            .field("first_column", &self.first_column)
            .field("first_row", &self.first_row)
            .finish()
    }
}

impl<T: Scalar> ToeplitzOperator<T> {
    /// General Toeplitz matrix from its first column and first row; the
    /// leading entries must agree.
    pub fn from_column_row(column: &[T], row: &[T]) -> Result<Self> {
        let n = column.len();
        if n == 0 {
            return Err(Error::TooFewPoints { n, min: 1 });
        }
        if row.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: row.len(),
            });
        }
        if row[0] != column[0] {
            return Err(Error::InvalidParameter(
                "first row and column disagree on the diagonal".into(),
            ));
        }
        let m = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut symbol = vec![Complex::default(); m];
        for (k, &c) in column.iter().enumerate() {
            symbol[k] = Complex::new(c, T::zero());
        }
        for (k, &r) in row.iter().enumerate().skip(1) {
            symbol[m - k] = Complex::new(r, T::zero());
        }
        forward.process(&mut symbol);
        Ok(Self {
            n,
            first_column: column.to_vec(),
            first_row: row.to_vec(),
            symbol,
            forward,
            inverse,
        })
    }

    /// Lower Hessenberg `T_n` with superdiagonal `q_0`, diagonal `q_1` and
    /// subdiagonals `q_2 .. q_n`.
    pub fn from_coefficients(table: &CoefficientTable<T>) -> Result<Self> {
        let q = table.q();
        let n = table.n();
        let column = q[1..=n].to_vec();
        let mut row = vec![T::zero(); n];
        row[0] = q[1];
        if n > 1 {
            row[1] = q[0];
        }
        Self::from_column_row(&column, &row)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_column(&self) -> &[T] {
        &self.first_column
    }

    pub fn first_row(&self) -> &[T] {
        &self.first_row
    }

    pub fn embedding_len(&self) -> usize {
        self.symbol.len()
    }

    /// FFT of the first column of the circulant embedding.
    pub fn embedded_symbol(&self) -> &[Complex<T>] {
        &self.symbol
    }

    /// `T x`, or `T^T x` when `transpose` is set.
    pub fn matvec(&self, x: &[T], transpose: bool) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let (a, b) = if transpose {
            (T::zero(), T::one())
        } else {
            (T::one(), T::zero())
        };
        let mut y = x.to_vec();
        let mut buf = Vec::new();
        self.weighted_in_place(a, b, &mut y, &mut buf);
        Ok(y)
    }

    /// Overwrites `x` with `(a T + b T^T) x` using one forward and one
    /// inverse FFT. The transpose of a real circulant has the conjugate
    /// symbol.
    pub(crate) fn weighted_in_place(&self, a: T, b: T, x: &mut [T], buf: &mut Vec<Complex<T>>) {
        let m = self.symbol.len();
        buf.clear();
        buf.resize(m, Complex::default());
        for (d, &v) in buf.iter_mut().zip(x.iter()) {
            d.re = v;
        }
        self.forward.process(buf);
        for (d, s) in buf.iter_mut().zip(&self.symbol) {
            *d *= s.scale(a) + s.conj().scale(b);
        }
        self.inverse.process(buf);
        let inv_m = T::one() / T::of_usize(m);
        for (v, d) in x.iter_mut().zip(buf.iter()) {
            *v = d.re * inv_m;
        }
    }

    /// Explicit `n x n` matrix.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.n, self.n, |i, j| {
            if i >= j {
                self.first_column[i - j]
            } else {
                self.first_row[j - i]
            }
        })
    }
}

/// Selects `A` (plus) or the right-hand-side operator `2 A_N - A` (minus).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// Left and right diffusion coefficients `k_{i,+}`, `k_{i,-}` of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusivity<T> {
    pub plus: T,
    pub minus: T,
}

impl<T: Scalar> Diffusivity<T> {
    pub fn new(plus: T, minus: T) -> Result<Self> {
        if !(plus.is_finite() && minus.is_finite() && plus >= T::zero() && minus >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "diffusivities must be finite and non-negative, got ({plus}, {minus})"
            )));
        }
        Ok(Self { plus, minus })
    }

    pub fn symmetric(k: T) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn is_symmetric(&self) -> bool {
        self.plus == self.minus
    }
}

/// `dt / (2 Gamma(delta + 1) h^{2 - delta})`.
pub fn eta<T: Scalar>(order: FractionalOrder<T>, h: T, dt: T) -> T {
    let d = order.value();
    dt / (T::of(2.0) * (d + T::one()).gamma() * h.powf(T::of(2.0) - d))
}

#[derive(Debug, Clone)]
struct Axis<T: Scalar> {
    order: FractionalOrder<T>,
    diffusivity: Diffusivity<T>,
    eta: T,
    table: Arc<CoefficientTable<T>>,
    toeplitz: Arc<ToeplitzOperator<T>>,
}

/// The Crank-Nicolson finite-volume operator on a 2D or 3D grid.
#[derive(Debug, Clone)]
pub struct CnFvOperator<T: Scalar> {
    grid: GridSpec<T>,
    dt: T,
    axes: Vec<Axis<T>>,
    sign: Sign,
}

impl<T: Scalar> CnFvOperator<T> {
    pub fn new(
        grid: GridSpec<T>,
        orders: &[FractionalOrder<T>],
        diffusivities: &[Diffusivity<T>],
        dt: T,
    ) -> Result<Self> {
        let d = grid.dim();
        if orders.len() != d || diffusivities.len() != d {
            return Err(Error::InvalidParameter(format!(
                "need {d} orders and diffusivities, got {} and {}",
                orders.len(),
                diffusivities.len()
            )));
        }
        if !(dt.is_finite() && dt >= T::zero()) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        let mut axes = Vec::with_capacity(d);
        for i in 0..d {
            let n = grid.shape()[i];
            // the coefficient table needs n >= 2; a single point only uses q_1
            let table = Arc::new(CoefficientTable::new(orders[i], n.max(2))?);
            let toeplitz = if n >= 2 {
                ToeplitzOperator::from_coefficients(&table)?
            } else {
                ToeplitzOperator::from_column_row(&table.q()[1..2], &table.q()[1..2])?
            };
            axes.push(Axis {
                order: orders[i],
                diffusivity: diffusivities[i],
                eta: eta(orders[i], grid.steps()[i], dt),
                table,
                toeplitz: Arc::new(toeplitz),
            });
        }
        Ok(Self {
            grid,
            dt,
            axes,
            sign: Sign::Plus,
        })
    }

    /// Same operator with the stiffness sign replaced.
    pub fn with_sign(&self, sign: Sign) -> Self {
        Self {
            sign,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn orders(&self) -> Vec<FractionalOrder<T>> {
        self.axes.iter().map(|a| a.order).collect()
    }

    pub fn diffusivities(&self) -> Vec<Diffusivity<T>> {
        self.axes.iter().map(|a| a.diffusivity).collect()
    }

    pub fn etas(&self) -> Vec<T> {
        self.axes.iter().map(|a| a.eta).collect()
    }

    pub fn coefficient_table(&self, axis: usize) -> &CoefficientTable<T> {
        &self.axes[axis].table
    }

    pub fn toeplitz(&self, axis: usize) -> &ToeplitzOperator<T> {
        &self.axes[axis].toeplitz
    }

    /// True when `k_+ = k_-` on every axis.
    pub fn is_symmetric(&self) -> bool {
        self.axes.iter().all(|a| a.diffusivity.is_symmetric())
    }

    fn signed_eta(&self, axis: usize) -> T {
        match self.sign {
            Sign::Plus => self.axes[axis].eta,
            Sign::Minus => -self.axes[axis].eta,
        }
    }

    pub fn apply(&self, u: &Field<T>) -> Result<Field<T>> {
        u.check_shape(self.grid.shape())?;
        let mut out = Field::zeros(self.grid.shape());
        self.apply_into(u.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// `y = op x` on raw x-fastest vectors of length `N`.
    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        let shape = self.grid.shape();
        let d = self.grid.dim();
        debug_assert_eq!(x.len(), self.len());
        let mut tmp = vec![T::zero(); x.len()];
        let mut buf = Vec::new();
        // mass-only term
        y.copy_from_slice(x);
        for axis in 0..d {
            map_lines_in_place(shape, axis, y, mass_in_place);
        }
        for term in 0..d {
            let eta = self.signed_eta(term);
            let k = self.axes[term].diffusivity;
            if eta == T::zero() || (k.plus == T::zero() && k.minus == T::zero()) {
                continue;
            }
            tmp.copy_from_slice(x);
            for axis in 0..d {
                if axis == term {
                    let op = &self.axes[axis].toeplitz;
                    map_lines_in_place(shape, axis, &mut tmp, |line| {
                        op.weighted_in_place(k.plus, k.minus, line, &mut buf)
                    });
                } else {
                    map_lines_in_place(shape, axis, &mut tmp, mass_in_place);
                }
            }
            crate::scalar::axpy(eta, &tmp, y);
        }
    }

    /// Dense `B_i = k_+ T + k_- T^T` of one axis.
    pub fn stiffness_dense(&self, axis: usize) -> DenseMatrix<T> {
        let t = self.axes[axis].toeplitz.to_dense();
        let k = self.axes[axis].diffusivity;
        DenseMatrix::from_fn(t.rows(), t.cols(), |i, j| k.plus * t[(i, j)] + k.minus * t[(j, i)])
    }

    /// Explicit matrix of the operator, assembled entry by entry from the
    /// per-axis factors.
    pub fn materialize_dense(&self) -> Result<DenseMatrix<T>> {
        let n = self.len();
        if n > DENSE_GUARD {
            return Err(Error::SizeGuard {
                size: n,
                limit: DENSE_GUARD,
            });
        }
        let d = self.grid.dim();
        let masses: Vec<_> = self.grid.shape().iter().map(|&m| mass_dense::<T>(m)).collect();
        let stiff: Vec<_> = (0..d).map(|i| self.stiffness_dense(i)).collect();
        let etas: Vec<T> = (0..d).map(|i| self.signed_eta(i)).collect();
        Ok(kron_sum_dense(self.grid.shape(), &masses, &stiff, &etas))
    }
}

/// `prod_i M_i + sum_i eta_i (B_i on axis i, M_j elsewhere)` as a dense matrix
/// in the x-fastest ordering.
pub(crate) fn kron_sum_dense<T: Scalar>(
    shape: &[usize],
    masses: &[DenseMatrix<T>],
    stiff: &[DenseMatrix<T>],
    etas: &[T],
) -> DenseMatrix<T> {
    let n: usize = shape.iter().product();
    let d = shape.len();
    let split = |mut r: usize| {
        let mut idx = [0usize; 3];
        for (a, &m) in shape.iter().enumerate() {
            idx[a] = r % m;
            r /= m;
        }
        idx
    };
    let idx: Vec<[usize; 3]> = (0..n).map(split).collect();
    DenseMatrix::from_fn(n, n, |r, c| {
        let (ri, ci) = (idx[r], idx[c]);
        let mut mass = T::one();
        for a in 0..d {
            mass = mass * masses[a][(ri[a], ci[a])];
        }
        let mut total = mass;
        for term in 0..d {
            let mut p = etas[term];
            for a in 0..d {
                let f = if a == term { &stiff[a] } else { &masses[a] };
                p = p * f[(ri[a], ci[a])];
            }
            total += p;
        }
        total
    })
}
