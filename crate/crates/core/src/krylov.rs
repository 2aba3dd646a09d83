//! Preconditioned conjugate gradients and restarted GMRES.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operators::CnFvOperator;
use crate::preconditioners::{CirculantPreconditioner, TauPreconditioner};
use crate::scalar::{axpy, dot, norm2, Scalar};

/// Square linear map on raw vectors.
pub trait LinearOperator<T> {
    fn len(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[T], y: &mut [T]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Action of an approximate inverse `M^{-1}`.
pub trait Preconditioner<T> {
    /// `z = M^{-1} r`.
    fn apply_inverse(&self, r: &[T], z: &mut [T]);
}

/// `M = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<T: Scalar> Preconditioner<T> for Identity {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) {
        z.copy_from_slice(r);
    }
}

/// Operator from a closure.
pub struct FnOperator<F> {
    len: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(len: usize, f: F) -> Self {
        Self { len, f }
    }
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn len(&self) -> usize {
        self.len
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn len(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, v) in y.iter_mut().enumerate() {
            *v = dot(self.row(i), x);
        }
    }
}

impl<T: Scalar> LinearOperator<T> for CnFvOperator<T> {
    fn len(&self) -> usize {
        self.grid().len()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_into(x, y)
    }
}

impl<T: Scalar> Preconditioner<T> for TauPreconditioner<T> {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) {
        self.apply_inverse_into(r, z)
    }
}

impl<T: Scalar> Preconditioner<T> for CirculantPreconditioner<T> {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) {
        self.apply_inverse_into(r, z)
    }
}

/// `P^{-1/2}` of a tau preconditioner as a linear operator.
#[derive(Debug, Clone, Copy)]
pub struct InverseSqrt<'a, T: Scalar>(pub &'a TauPreconditioner<T>);

impl<T: Scalar> LinearOperator<T> for InverseSqrt<'_, T> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.0.apply_inverse_sqrt_into(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig<T> {
    /// Relative residual threshold.
    pub tol: T,
    /// Iteration cap; `None` uses the system size.
    pub maxit: Option<usize>,
    /// GMRES cycle length.
    pub restart: usize,
}

impl<T: Scalar> Default for KrylovConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-9),
            maxit: None,
            restart: 20,
        }
    }
}

impl<T: Scalar> KrylovConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tol = {}", self.tol)));
        }
        if self.restart == 0 || self.maxit == Some(0) {
            return Err(Error::InvalidParameter(
                "restart and maxit must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn cap(&self, n: usize) -> usize {
        self.maxit.unwrap_or(n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Breakdown {
    /// `p^T A p <= 0` in CG: the operator is not SPD.
    NonPositiveCurvature,
    /// `r^T M^{-1} r <= 0` in CG: the preconditioner is not SPD.
    IndefinitePreconditioner,
    /// A full GMRES cycle made no progress.
    Stagnation,
    /// NaN or infinity in the iteration.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats<T> {
    pub iterations: usize,
    /// Relative residual before the first iteration and after each one.
    pub residual_history: Vec<T>,
    /// Norm the history is relative to (`||b||` or `||M^{-1} b||`).
    pub reference_norm: T,
    pub converged: bool,
    pub breakdown: Option<Breakdown>,
}

impl<T: Scalar> SolveStats<T> {
    /// Residual norms without the relative scaling.
    pub fn absolute_history(&self) -> Vec<T> {
        let s = if self.reference_norm > T::zero() {
            self.reference_norm
        } else {
            T::one()
        };
        self.residual_history.iter().map(|&r| r * s).collect()
    }

    pub fn final_residual(&self) -> T {
        *self.residual_history.last().expect("history is never empty")
    }
}

fn check_lengths<T>(a: &(impl LinearOperator<T> + ?Sized), b: &[T], x0: &[T]) -> Result<()> {
    for v in [b.len(), x0.len()] {
        if v != a.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                found: v,
            });
        }
    }
    Ok(())
}

/// Residual `b - A x`.
fn residual<T: Scalar>(a: &(impl LinearOperator<T> + ?Sized), b: &[T], x: &[T], out: &mut [T]) {
    a.apply(x, out);
    for (o, &bi) in out.iter_mut().zip(b) {
        *o = bi - *o;
    }
}

/// Preconditioned conjugate gradients. Stops when `||b - A x|| <= tol ||b||`;
/// a converged recurrence residual is confirmed against the explicit one.
pub fn pcg<T: Scalar>(
    a: &(impl LinearOperator<T> + ?Sized),
    m: &(impl Preconditioner<T> + ?Sized),
    b: &[T],
    x0: &[T],
    cfg: &KrylovConfig<T>,
) -> Result<(Vec<T>, SolveStats<T>)> {
    cfg.validate()?;
    check_lengths(a, b, x0)?;
    let n = a.len();
    let maxit = cfg.cap(n);
    let bnorm = norm2(b);
    let scale = if bnorm > T::zero() { bnorm } else { T::one() };
    let target = cfg.tol * bnorm;
    let mut x = x0.to_vec();
    let mut r = vec![T::zero(); n];
    residual(a, b, &x, &mut r);
    let mut stats = SolveStats {
        iterations: 0,
        residual_history: vec![norm2(&r) / scale],
        reference_norm: bnorm,
        converged: false,
        breakdown: None,
    };
    if norm2(&r) <= target {
        stats.converged = true;
        return Ok((x, stats));
    }
    let mut z = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    m.apply_inverse(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    while stats.iterations < maxit {
        if !(rz > T::zero()) {
            stats.breakdown = Some(if rz.is_finite() {
                Breakdown::IndefinitePreconditioner
            } else {
                Breakdown::NonFinite
            });
            break;
        }
        a.apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > T::zero()) {
            stats.breakdown = Some(if curvature.is_finite() {
                Breakdown::NonPositiveCurvature
            } else {
                Breakdown::NonFinite
            });
            break;
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        stats.iterations += 1;
        let mut rnorm = norm2(&r);
        if rnorm <= target {
            residual(a, b, &x, &mut r);
            rnorm = norm2(&r);
        }
        stats.residual_history.push(rnorm / scale);
        if rnorm <= target {
            stats.converged = true;
            break;
        }
        m.apply_inverse(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok((x, stats))
}

/// Left-preconditioned restarted GMRES with modified Gram-Schmidt Arnoldi and
/// Givens rotations. Converges when `||M^{-1}(b - A x)|| <= tol ||M^{-1} b||`,
/// checked on the explicit residual at every cycle boundary. Iterations count
/// Arnoldi steps across all cycles.
pub fn gmres_restarted<T: Scalar>(
    a: &(impl LinearOperator<T> + ?Sized),
    m: &(impl Preconditioner<T> + ?Sized),
    b: &[T],
    x0: &[T],
    cfg: &KrylovConfig<T>,
) -> Result<(Vec<T>, SolveStats<T>)> {
    cfg.validate()?;
    check_lengths(a, b, x0)?;
    let n = a.len();
    let maxit = cfg.cap(n);
    let restart = cfg.restart.min(maxit).max(1);
    let mut tmp = vec![T::zero(); n];
    m.apply_inverse(b, &mut tmp);
    let ref_norm = norm2(&tmp);
    let scale = if ref_norm > T::zero() { ref_norm } else { T::one() };
    let target = cfg.tol * ref_norm;

    let mut x = x0.to_vec();
    let mut stats = SolveStats {
        iterations: 0,
        residual_history: Vec::new(),
        reference_norm: ref_norm,
        converged: false,
        breakdown: None,
    };
    let mut r = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(restart + 1);
    // column-major Hessenberg, h[j][i] = H(i, j)
    let mut h: Vec<Vec<T>> = Vec::with_capacity(restart);
    let mut cs = vec![T::zero(); restart];
    let mut sn = vec![T::zero(); restart];
    let mut g = vec![T::zero(); restart + 1];
    loop {
        residual(a, b, &x, &mut tmp);
        m.apply_inverse(&tmp, &mut r);
        let beta = norm2(&r);
        match stats.residual_history.last_mut() {
            Some(last) => *last = beta / scale,
            None => stats.residual_history.push(beta / scale),
        }
        if !beta.is_finite() {
            stats.breakdown = Some(Breakdown::NonFinite);
            break;
        }
        if beta <= target {
            stats.converged = true;
            break;
        }
        if stats.iterations >= maxit {
            break;
        }
        basis.clear();
        h.clear();
        basis.push(r.iter().map(|&v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = T::zero());
        g[0] = beta;
        let mut happy = false;
        let mut cols = 0;
        for j in 0..restart {
            a.apply(&basis[j], &mut tmp);
            m.apply_inverse(&tmp, &mut w);
            let wnorm0 = norm2(&w);
            let mut col = vec![T::zero(); j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                axpy(-hij, v, &mut w);
                col[i] = hij;
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            for i in 0..j {
                let (c, s) = (cs[i], sn[i]);
                let (u, v) = (col[i], col[i + 1]);
                col[i] = c * u + s * v;
                col[i + 1] = -s * u + c * v;
            }
            let (u, v) = (col[j], col[j + 1]);
            let rho = u.hypot(v);
            let (c, s) = if rho > T::zero() { (u / rho, v / rho) } else { (T::one(), T::zero()) };
            cs[j] = c;
            sn[j] = s;
            col[j] = rho;
            col[j + 1] = T::zero();
            g[j + 1] = -s * g[j];
            g[j] = c * g[j];
            h.push(col);
            cols = j + 1;
            stats.iterations += 1;
            let est = g[j + 1].abs();
            stats.residual_history.push(est / scale);
            if hnext <= T::epsilon() * wnorm0.max(T::min_positive_value()) {
                happy = true;
                break;
            }
            if est <= target || stats.iterations >= maxit {
                break;
            }
            basis.push(w.iter().map(|&v| v / hnext).collect());
        }
        // back substitution on the rotated triangle
        let mut y = vec![T::zero(); cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for k in i + 1..cols {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            axpy(*yk, &basis[k], &mut x);
        }
        let end_estimate = g[cols].abs();
        if happy {
            residual(a, b, &x, &mut tmp);
            m.apply_inverse(&tmp, &mut r);
            *stats.residual_history.last_mut().unwrap() = norm2(&r) / scale;
            stats.converged = true;
            break;
        }
        if end_estimate >= beta * (T::one() - T::of(1e-12)) && stats.iterations < maxit {
            stats.breakdown = Some(Breakdown::Stagnation);
            residual(a, b, &x, &mut tmp);
            m.apply_inverse(&tmp, &mut r);
            *stats.residual_history.last_mut().unwrap() = norm2(&r) / scale;
            break;
        }
    }
    Ok((x, stats))
}

/// GMRES on `P^{-1/2} A P^{-1/2} v = P^{-1/2} b` from `v0 = x0_hat`; returns
/// `u = P^{-1/2} v`. The history is relative to `||P^{-1/2} b||`.
pub fn gmres_two_sided<T: Scalar>(
    a: &(impl LinearOperator<T> + ?Sized),
    p_inv_half: &(impl LinearOperator<T> + ?Sized),
    b: &[T],
    x0_hat: &[T],
    cfg: &KrylovConfig<T>,
) -> Result<(Vec<T>, SolveStats<T>)> {
    check_lengths(a, b, x0_hat)?;
    let n = a.len();
    let mut bh = vec![T::zero(); n];
    p_inv_half.apply(b, &mut bh);
    let sandwich = FnOperator::new(n, |x: &[T], y: &mut [T]| {
        let mut t1 = vec![T::zero(); n];
        let mut t2 = vec![T::zero(); n];
        p_inv_half.apply(x, &mut t1);
        a.apply(&t1, &mut t2);
        p_inv_half.apply(&t2, y);
    });
    let (v, stats) = gmres_restarted(&sandwich, &Identity, &bh, x0_hat, cfg)?;
    let mut u = vec![T::zero(); n];
    p_inv_half.apply(&v, &mut u);
    Ok((u, stats))
}
