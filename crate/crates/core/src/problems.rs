//! Problem definitions and the two built-in manufactured solutions.

use std::fmt;
use std::sync::Arc;

use crate::coeffs::FractionalOrder;
use crate::error::{Error, Result};
use crate::operators::{Diffusivity, GridSpec};
use crate::scalar::Scalar;

/// `f(x, t)` with `x` holding one coordinate per axis.
pub type SpaceTimeFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
/// `u_0(x)`.
pub type SpaceFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// `u_t = sum_i d/dx_i (k_{i,+} D^{delta_i}_{left} - k_{i,-} D^{delta_i}_{right}) u + f`
/// on a box with homogeneous Dirichlet data, solved on `(0, T]` in `M` steps.
#[derive(Clone)]
pub struct ProblemSpec<T: Scalar> {
    pub grid: GridSpec<T>,
    pub orders: Vec<FractionalOrder<T>>,
    pub diffusivities: Vec<Diffusivity<T>>,
    pub horizon: T,
    pub steps: usize,
    pub source: SpaceTimeFn<T>,
    pub initial: SpaceFn<T>,
    pub exact: Option<SpaceTimeFn<T>>,
}

impl<T: Scalar> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("grid", &self.grid)
            .field("orders", &self.orders)
            .field("diffusivities", &self.diffusivities)
            .field("horizon", &self.horizon)
            .field("steps", &self.steps)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn dt(&self) -> T {
        self.horizon / T::of_usize(self.steps)
    }

    pub fn is_symmetric(&self) -> bool {
        self.diffusivities.iter().all(|k| k.is_symmetric())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.grid.dim();
        if self.orders.len() != d || self.diffusivities.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{d}-dimensional grid needs {d} orders and diffusivities"
            )));
        }
        if self.steps == 0 || !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need a positive horizon and step count, got T = {}, M = {}",
                self.horizon, self.steps
            )));
        }
        Ok(())
    }

    /// Same problem on a different grid and step count.
    pub fn refined(&self, n: &[usize], steps: usize) -> Result<Self> {
        let bounds = self.grid.bounds().to_vec();
        Ok(Self {
            grid: GridSpec::new(&bounds, n)?,
            steps,
            ..self.clone()
        })
    }
}

/// `x^2 (1 - x)^2`.
fn bump<T: Scalar>(x: T) -> T {
    let y = x * (T::one() - x);
    y * y
}

/// `sum_{k=0}^{2} (-1)^{2-k} C(2,k) Gamma(5-k)/Gamma(3-k+d) [k_+ x^{2-k+d} + k_- (1-x)^{2-k+d}]`,
/// the flux term produced by one axis factor `x^2 (1-x)^2`.
pub fn flux_factor<T: Scalar>(x: T, order: T, k: Diffusivity<T>) -> T {
    const BINOM: [f64; 3] = [1.0, 2.0, 1.0];
    let mut total = T::zero();
    for (j, &c) in BINOM.iter().enumerate() {
        let sign = if (2 - j) % 2 == 0 { T::one() } else { -T::one() };
        let p = T::of_usize(2 - j) + order;
        let coef = sign * T::of(c) * T::of_usize(5 - j).gamma() / (p + T::one()).gamma();
        total += coef * (k.plus * x.powf(p) + k.minus * (T::one() - x).powf(p));
    }
    total
}

/// Built-in manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// 2D, `u = 4 e^t x^2 (1-x)^2 y^2 (1-y)^2`.
    Ex1,
    /// 3D, `u = sin(t + 1) x^2 (1-x)^2 y^2 (1-y)^2 z^2 (1-z)^2`.
    Ex2,
}

impl Example {
    pub fn dim(self) -> usize {
        match self {
            Example::Ex1 => 2,
            Example::Ex2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1 => "ex1",
            Example::Ex2 => "ex2",
        }
    }

    /// Symmetric diffusivities used in the reference runs.
    pub fn symmetric_diffusivities<T: Scalar>(self) -> Vec<Diffusivity<T>> {
        vec![Diffusivity { plus: T::of(5.0), minus: T::of(5.0) }; self.dim()]
    }

    /// Non-symmetric diffusivities used in the reference runs.
    pub fn nonsymmetric_diffusivities<T: Scalar>(self) -> Vec<Diffusivity<T>> {
        [(19.0, 21.0), (21.0, 23.0), (23.0, 25.0)][..self.dim()]
            .iter()
            .map(|&(p, m)| Diffusivity { plus: T::of(p), minus: T::of(m) })
            .collect()
    }

    /// Problem on `(0, 1)^d`, `T = 1`, with `n_plus_1 - 1` interior points per
    /// axis and `steps` time steps.
    pub fn problem<T: Scalar>(
        self,
        orders: &[T],
        diffusivities: &[Diffusivity<T>],
        n_plus_1: usize,
        steps: usize,
    ) -> Result<ProblemSpec<T>> {
        let d = self.dim();
        if orders.len() != d || diffusivities.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{} needs {d} orders and {d} diffusivity pairs",
                self.name()
            )));
        }
        if n_plus_1 < 2 {
            return Err(Error::TooFewPoints { n: n_plus_1.saturating_sub(1), min: 1 });
        }
        let orders = orders
            .iter()
            .map(|&v| FractionalOrder::new(v))
            .collect::<Result<Vec<_>>>()?;
        let grid = GridSpec::unit(&vec![n_plus_1 - 1; d])?;
        let ks = diffusivities.to_vec();
        let (time_u, time_ut): (fn(T) -> T, fn(T) -> T) = match self {
            Example::Ex1 => (|t: T| T::of(4.0) * t.exp(), |t: T| T::of(4.0) * t.exp()),
            Example::Ex2 => (|t: T| (t + T::one()).sin(), |t: T| (t + T::one()).cos()),
        };
        let ord: Vec<T> = orders.iter().map(|o| o.value()).collect();
        let source: SpaceTimeFn<T> = Arc::new(move |x: &[T], t: T| {
            let factors: Vec<T> = x.iter().map(|&xi| bump(xi)).collect();
            let base = factors.iter().fold(T::one(), |p, &f| p * f);
            let mut flux = T::zero();
            for i in 0..x.len() {
                let others = factors
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(T::one(), |p, (_, &f)| p * f);
                flux += others * flux_factor(x[i], ord[i], ks[i]);
            }
            time_ut(t) * base - time_u(t) * flux
        });
        let exact: SpaceTimeFn<T> = Arc::new(move |x: &[T], t: T| {
            time_u(t) * x.iter().fold(T::one(), |p, &xi| p * bump(xi))
        });
        let exact0 = exact.clone();
        Ok(ProblemSpec {
            grid,
            orders,
            diffusivities: diffusivities.to_vec(),
            horizon: T::one(),
            steps,
            source,
            initial: Arc::new(move |x: &[T]| exact0(x, T::zero())),
            exact: Some(exact),
        })
    }
}

impl std::str::FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ex1" => Ok(Example::Ex1),
            "ex2" => Ok(Example::Ex2),
            other => Err(Error::InvalidParameter(format!("unknown problem '{other}'"))),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_factor_matches_hand_expansion() {
        // d = 0.5, k = (1, 0), x = 0.3:
        // 24/G(3.5) x^2.5 - 2*6/G(2.5) x^1.5 + 2/G(1.5) x^0.5
        let x: f64 = 0.3;
        let g = |v: f64| libm::tgamma(v);
        let want = 24.0 / g(3.5) * x.powf(2.5) - 12.0 / g(2.5) * x.powf(1.5) + 2.0 / g(1.5) * x.powf(0.5);
        let got = flux_factor(x, 0.5, Diffusivity { plus: 1.0, minus: 0.0 });
        assert!((got - want).abs() < 1e-14);
        // mirrored side
        let got = flux_factor(1.0 - x, 0.5, Diffusivity { plus: 0.0, minus: 1.0 });
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn examples_build() {
        let p = Example::Ex1
            .problem(&[0.1, 0.2], &Example::Ex1.symmetric_diffusivities(), 8, 4)
            .unwrap();
        assert_eq!(p.grid.shape(), &[7, 7]);
        assert_eq!(p.dt(), 0.25);
        assert!(p.is_symmetric());
        let u = p.exact.as_ref().unwrap();
        assert!((u(&[0.5, 0.5], 0.0) - 4.0 / 256.0f64).abs() < 1e-15);
        assert_eq!((p.initial)(&[0.5, 0.5]), u(&[0.5, 0.5], 0.0));
        let q = Example::Ex2
            .problem(&[0.1, 0.2, 0.3], &Example::Ex2.nonsymmetric_diffusivities(), 8, 4)
            .unwrap();
        assert!(!q.is_symmetric());
        assert!(Example::Ex2.problem(&[0.1, 0.2], &Example::Ex2.symmetric_diffusivities(), 8, 4).is_err());
        assert!(Example::Ex1.problem(&[0.1, 1.2], &Example::Ex1.symmetric_diffusivities(), 8, 4).is_err());
        assert_eq!("EX2".parse::<Example>().unwrap(), Example::Ex2);
        assert!("ex3".parse::<Example>().is_err());
    }
}
