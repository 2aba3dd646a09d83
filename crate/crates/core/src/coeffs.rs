//! Finite-volume coefficients of the one-sided fractional flux.
//!
//! `s_k` are the reduced integrals of the Riemann-Liouville derivative of a
//! hat function evaluated at cell faces; `q_k` are their first differences and
//! populate every stiffness Toeplitz matrix.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Order `delta` of the fractional flux, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder<T>(T);

impl<T: Scalar> FractionalOrder<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value < T::one() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidOrder(value.as_f64()))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Beyond this index `s_k` is summed from its binomial series instead of the
/// three-term difference, which loses about `2 log10(k)` digits.
const SERIES_THRESHOLD: usize = 16;

/// Closed-form `s_k` for `k >= 2`:
/// `(k + 1/2)^d - 2 (k - 1/2)^d + (k - 3/2)^d`.
fn second_difference<T: Scalar>(delta: T, k: usize) -> T {
    let half = T::of(0.5);
    let k = T::of_usize(k);
    if k < T::of_usize(SERIES_THRESHOLD) {
        return (k + half).powf(delta) - T::of(2.0) * (k - half).powf(delta)
            + (k - T::of(1.5)).powf(delta);
    }
    // With x = k - 1/2 and u = 1/x:
    // (1+u)^d + (1-u)^d - 2 = 2 * sum_{m>=1} C(d, 2m) u^{2m}
    let x = k - half;
    let u2 = (T::one() / x).powi(2);
    let mut binom = T::one();
    let mut upow = T::one();
    let mut sum = T::zero();
    let mut j = 0usize;
    loop {
        // advance C(d, j) two steps to C(d, j + 2)
        for _ in 0..2 {
            j += 1;
            binom *= (delta - T::of_usize(j - 1)) / T::of_usize(j);
        }
        upow *= u2;
        let term = binom * upow;
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() || j > 200 {
            break;
        }
    }
    T::of(2.0) * x.powf(delta) * sum
}

/// `s_0 .. s_n` for order `delta`.
pub fn compute_s_coefficients<T: Scalar>(order: FractionalOrder<T>, n: usize) -> Result<Vec<T>> {
    if n < 2 {
        return Err(Error::TooFewPoints { n, min: 2 });
    }
    let d = order.value();
    let half = T::of(0.5);
    let mut s = Vec::with_capacity(n + 1);
    s.push(half.powf(d));
    s.push(T::of(1.5).powf(d) - T::of(2.0) * half.powf(d));
    s.extend((2..=n).map(|k| second_difference(d, k)));
    Ok(s)
}

/// `q_0 .. q_n` with `q_0 = -s_0` and `q_k = s_{k-1} - s_k`.
pub fn compute_q_coefficients<T: Scalar>(order: FractionalOrder<T>, n: usize) -> Result<Vec<T>> {
    let s = compute_s_coefficients(order, n)?;
    Ok(q_from_s(&s))
}

fn q_from_s<T: Scalar>(s: &[T]) -> Vec<T> {
    std::iter::once(-s[0])
        .chain(s.windows(2).map(|w| w[0] - w[1]))
        .collect()
}

/// Both coefficient sequences for one `(delta, n)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<T> {
    order: FractionalOrder<T>,
    n: usize,
    s: Vec<T>,
    q: Vec<T>,
}

impl<T: Scalar> CoefficientTable<T> {
    pub fn new(order: FractionalOrder<T>, n: usize) -> Result<Self> {
        let s = compute_s_coefficients(order, n)?;
        let q = q_from_s(&s);
        Ok(Self { order, n, s, q })
    }

    pub fn order(&self) -> FractionalOrder<T> {
        self.order
    }

    /// Interior points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> &[T] {
        &self.s
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    /// Rebuilds `s` from `q` by prefix sums: `s_k = s_0 - (q_1 + ... + q_k)`.
    pub fn reconstruct_s(&self) -> Vec<T> {
        let mut acc = -self.q[0];
        let mut out = vec![acc];
        for &qk in &self.q[1..] {
            acc -= qk;
            out.push(acc);
        }
        out
    }

    /// Names of the sign, monotonicity, partial-sum and reconstruction
    /// properties that fail; empty when all hold.
    pub fn invariant_violations(&self) -> Vec<&'static str> {
        let q = &self.q;
        let mut bad = Vec::new();
        if !(q[0] == -self.s[0] && q[1..].iter().zip(self.s.windows(2)).all(|(&qk, w)| qk == w[0] - w[1])) {
            bad.push("first difference");
        }
        if !(q[1] > T::zero()) {
            bad.push("q1 positive");
        }
        if !(q[0] + q[2] < T::zero()) {
            bad.push("q0 + q2 negative");
        }
        if !q.iter().skip(3).all(|&v| v < T::zero()) {
            bad.push("tail negative");
        }
        if q.len() > 3 && !(q[0] + q[2] < q[3] && q[3..].windows(2).all(|w| w[0] < w[1])) {
            bad.push("tail increasing");
        }
        let mut partial = q[0] + q[1] + q[2];
        let mut positive = partial > T::zero();
        for &qk in q.iter().skip(3) {
            partial += qk;
            positive &= partial > T::zero();
        }
        if !positive {
            bad.push("partial sums positive");
        }
        let scale = self.s.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::of(1e-14).max(T::of(64.0) * T::epsilon()) * scale;
        if self.reconstruct_s().iter().zip(&self.s).any(|(&a, &b)| (a - b).abs() > tol) {
            bad.push("reconstruction");
        }
        bad
    }
}

/// Shared tables keyed by `(delta, n)`; every time step and every
/// preconditioner built on the same grid reuses them.
#[derive(Debug, Default)]
pub struct CoefficientCache<T> {
    tables: RwLock<HashMap<(u64, usize), Arc<CoefficientTable<T>>>>,
}

impl<T: Scalar> CoefficientCache<T> {
    pub fn new() -> Self {
        Self {
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, order: FractionalOrder<T>, n: usize) -> Result<Arc<CoefficientTable<T>>> {
        let key = (order.value().as_f64().to_bits(), n);
        if let Some(t) = self.tables.read().expect("coefficient cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(CoefficientTable::new(order, n)?);
        let mut map = self.tables.write().expect("coefficient cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(table)))
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("coefficient cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
