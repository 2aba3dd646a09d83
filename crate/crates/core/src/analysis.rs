//! Symbol evaluation, closed-form bound constants and dense spectral checks of
//! the preconditioned operator.

use num_complex::Complex;

use crate::coeffs::{compute_q_coefficients, FractionalOrder};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operators::{CnFvOperator, Diffusivity, Sign};
use crate::preconditioners::TauPreconditioner;
use crate::scalar::Scalar;

/// Largest system handed to the dense eigensolver.
pub const EIGEN_GUARD: usize = 1024;

/// Default length of the truncated symbol series.
pub const DEFAULT_SYMBOL_TERMS: usize = 100_000;

/// Minimum length accepted by [`symbol_truncated`].
pub const MIN_SYMBOL_TERMS: usize = 1000;

/// Terms used by the accelerated alternating sums. The acceleration error is
/// bounded by `2 a_0 / (3 + sqrt 8)^n`, about `1e-24 a_0` here.
const ALTERNATING_TERMS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolMethod {
    TruncatedSeries,
    LerchClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolEvaluation<T> {
    pub order: FractionalOrder<T>,
    pub theta: T,
    pub value: Complex<T>,
    pub method: SymbolMethod,
}

impl<T: Scalar> SymbolEvaluation<T> {
    pub fn compute(order: FractionalOrder<T>, theta: T, method: SymbolMethod) -> Result<Self> {
        let value = match method {
            SymbolMethod::TruncatedSeries => symbol_truncated(order, theta, DEFAULT_SYMBOL_TERMS)?,
            SymbolMethod::LerchClosedForm => symbol_lerch(order, theta)?,
        };
        Ok(Self { order, theta, value, method })
    }

    /// `|Im g| / Re g`.
    pub fn sector_ratio(&self) -> T {
        self.value.im.abs() / self.value.re
    }

    /// `tan(delta pi / 2)`, the sector half-opening.
    pub fn sector_bound(&self) -> T {
        sector_tan(self.order)
    }

    /// `Re g > 0` and `|Im g| / Re g < tan(delta pi / 2)`.
    pub fn in_sector(&self) -> bool {
        self.value.re > T::zero() && self.sector_ratio() < self.sector_bound()
    }
}

fn sector_tan<T: Scalar>(order: FractionalOrder<T>) -> T {
    (order.value() * T::FRAC_PI_2()).tan()
}

/// Maps `theta` into `(-pi, pi]` and rejects multiples of `2 pi`.
fn reduce_angle<T: Scalar>(theta: T) -> Result<T> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    let two_pi = T::TAU();
    let mut r = theta - two_pi * (theta / two_pi).round();
    if r <= -T::PI() {
        r += two_pi;
    }
    let tol = T::of(16.0) * T::epsilon() * theta.abs().max(T::one());
    if r.abs() <= tol {
        return Err(Error::LatticePoint(theta.as_f64()));
    }
    Ok(r)
}

/// Partial sum `sum_{j=0}^{terms} q_j e^{i (j-1) theta}` of the generating
/// function of the first-column sequence.
pub fn symbol_truncated<T: Scalar>(order: FractionalOrder<T>, theta: T, terms: usize) -> Result<Complex<T>> {
    Ok(symbol_truncated_many(order, &[theta], terms)?[0])
}

/// [`symbol_truncated`] at several angles, sharing one coefficient table.
pub fn symbol_truncated_many<T: Scalar>(
    order: FractionalOrder<T>,
    thetas: &[T],
    terms: usize,
) -> Result<Vec<Complex<T>>> {
    if terms < MIN_SYMBOL_TERMS {
        return Err(Error::InvalidParameter(format!(
            "truncated symbol needs at least {MIN_SYMBOL_TERMS} terms, got {terms}"
        )));
    }
    for &theta in thetas {
        reduce_angle(theta)?;
    }
    let q = compute_q_coefficients(order, terms)?;
    Ok(thetas
        .iter()
        .map(|&theta| {
            let mut re = T::zero();
            let mut im = T::zero();
            for (j, &qj) in q.iter().enumerate() {
                let phase = T::of(j as f64 - 1.0) * theta;
                re += qj * phase.cos();
                im += qj * phase.sin();
            }
            Complex::new(re, im)
        })
        .collect())
}

/// `sum_{n>=0} (-1)^n a(n)` for a totally monotone `a`, by the
/// Cohen, Rodriguez Villegas and Zagier acceleration.
pub fn alternating_sum<T: Scalar>(a: impl Fn(usize) -> T, terms: usize) -> T {
    let n = T::of_usize(terms);
    let mut d = (T::of(3.0) + T::of(8.0).sqrt()).powf(n);
    d = (d + d.recip()) / T::of(2.0);
    let mut b = -T::one();
    let mut c = -d;
    let mut s = T::zero();
    for k in 0..terms {
        c = b - c;
        s += c * a(k);
        let kf = T::of_usize(k);
        b = b * (kf + n) * (kf - n) / ((kf + T::of(0.5)) * (kf + T::one()));
    }
    s / d
}

/// Closed form of the generating function through the two alternating sums
/// `A_1 = sum (-1)^n (2(n+1)pi - theta)^{-delta-1}` and
/// `A_2 = sum (-1)^n (2 n pi + theta)^{-delta-1}`; negative angles use
/// conjugate symmetry.
pub fn symbol_lerch<T: Scalar>(order: FractionalOrder<T>, theta: T) -> Result<Complex<T>> {
    let r = reduce_angle(theta)?;
    let th = r.abs();
    let d = order.value();
    let p = -(d + T::one());
    let two_pi = T::TAU();
    let a1 = alternating_sum(|n| (two_pi * T::of_usize(n + 1) - th).powf(p), ALTERNATING_TERMS);
    let a2 = alternating_sum(|n| (two_pi * T::of_usize(n) + th).powf(p), ALTERNATING_TERMS);
    // 2 sin(3t/2) - 6 sin(t/2), without the cancellation near t = 0
    let c = -T::of(8.0) * (T::of(0.5) * th).sin().powi(3);
    let g = (d + T::one()).gamma();
    let half = d * T::FRAC_PI_2();
    let value = Complex::new(-g * half.cos() * c * (a1 + a2), g * half.sin() * c * (a1 - a2));
    Ok(if r < T::zero() { value.conj() } else { value })
}

/// `count` Chebyshev-spaced angles in `(0, pi]`, clustered at both ends.
pub fn theta_grid<T: Scalar>(count: usize) -> Vec<T> {
    let m = T::of_usize(count);
    (1..=count)
        .map(|k| T::FRAC_PI_2() * (T::one() - (T::PI() * T::of_usize(k) / m).cos()))
        .collect()
}

/// Closed-form constants and, when computed densely, the observed spectrum of
/// the two-sided preconditioned Hermitian and skew parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport<T> {
    pub varsigma: T,
    pub omega: T,
    pub hermitian_extremes: Option<(T, T)>,
    pub skew_radius: Option<T>,
}

impl<T: Scalar> BoundReport<T> {
    /// Smallest distance of the Hermitian extremes to the interval `(lo, hi)`;
    /// positive when strictly inside.
    pub fn hermitian_margin(&self, lo: T, hi: T) -> Option<T> {
        self.hermitian_extremes.map(|(a, b)| (a - lo).min(hi - b))
    }

    /// `varsigma - skew_radius`.
    pub fn skew_margin(&self) -> Option<T> {
        self.skew_radius.map(|r| self.varsigma - r)
    }
}

/// `1.5 max_i tan(delta_i pi / 2) |k_+ - k_-| / (k_+ + k_-)`. Axes with
/// vanishing diffusion contribute nothing.
pub fn varsigma<T: Scalar>(orders: &[FractionalOrder<T>], diffusivities: &[Diffusivity<T>]) -> Result<T> {
    if orders.len() != diffusivities.len() {
        return Err(Error::LengthMismatch {
            expected: orders.len(),
            found: diffusivities.len(),
        });
    }
    let mut worst = T::zero();
    for (&o, k) in orders.iter().zip(diffusivities) {
        let total = k.plus + k.minus;
        if total > T::zero() {
            worst = worst.max(sector_tan(o) * (k.plus - k.minus).abs() / total);
        }
    }
    Ok(T::of(1.5) * worst)
}

/// `sqrt((2 + 4 s^2) / (3 + 4 s^2))`.
pub fn omega<T: Scalar>(varsigma: T) -> T {
    let s2 = T::of(4.0) * varsigma * varsigma;
    ((T::of(2.0) + s2) / (T::of(3.0) + s2)).sqrt()
}

/// The constants only; no spectrum is computed.
pub fn compute_bounds<T: Scalar>(
    orders: &[FractionalOrder<T>],
    diffusivities: &[Diffusivity<T>],
) -> Result<BoundReport<T>> {
    let s = varsigma(orders, diffusivities)?;
    Ok(BoundReport {
        varsigma: s,
        omega: omega(s),
        hermitian_extremes: None,
        skew_radius: None,
    })
}

/// Dense `P^{-1/2} H(A) P^{-1/2}` and `P^{-1/2} S(A) P^{-1/2}`: extreme
/// eigenvalues of the first and spectral radius of the second.
pub fn dense_preconditioned_spectrum<T: Scalar>(
    op: &CnFvOperator<T>,
    p: &TauPreconditioner<T>,
) -> Result<BoundReport<T>> {
    if op.sign() != Sign::Plus {
        return Err(Error::InvalidParameter(
            "spectral bounds concern the implicit operator".into(),
        ));
    }
    if op.grid().shape() != p.shape() {
        return Err(Error::ShapeMismatch {
            expected: op.grid().shape().to_vec(),
            found: p.shape().to_vec(),
        });
    }
    if op.len() > EIGEN_GUARD {
        return Err(Error::SizeGuard {
            size: op.len(),
            limit: EIGEN_GUARD,
        });
    }
    let a = op.materialize_dense()?;
    let ph = p.dense_inverse_sqrt()?;
    let sandwich = |m: &DenseMatrix<T>| ph.matmul(&m.matmul(&ph));
    let h = sandwich(&a.symmetric_part()).symmetric_part();
    let ev = h.symmetric_eigenvalues();
    let s = sandwich(&a.skew_part());
    let skew_radius = if s.max_abs() == T::zero() {
        T::zero()
    } else {
        // -S^2 = S^T S for skew S
        let gram = s.transpose().matmul(&s).symmetric_part();
        let top = gram.symmetric_eigenvalues().last().copied().unwrap_or_else(T::zero);
        top.max(T::zero()).sqrt()
    };
    let mut report = compute_bounds(&op.orders(), &op.diffusivities())?;
    report.hermitian_extremes = Some((ev[0], ev[ev.len() - 1]));
    report.skew_radius = Some(skew_radius);
    Ok(report)
}

/// First `k` with `r_k > omega^k r_0 (1 + slack)`, if any.
pub fn rate_envelope_violation<T: Scalar>(history: &[T], omega: T, slack: T) -> Option<usize> {
    let r0 = *history.first()?;
    let mut env = r0;
    for (k, &r) in history.iter().enumerate() {
        if r > env * (T::one() + slack) {
            return Some(k);
        }
        env *= omega;
    }
    None
}

/// First `j` with `one[j] > factor * two[j] (1 + slack)` over the common prefix.
pub fn paired_residual_violation<T: Scalar>(one: &[T], two: &[T], factor: T, slack: T) -> Option<usize> {
    one.iter()
        .zip(two)
        .position(|(&a, &b)| a > factor * b * (T::one() + slack))
}
