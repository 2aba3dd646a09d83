//! Crank-Nicolson time marching, source quadrature, error norms and observed
//! orders.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::krylov::{gmres_restarted, pcg, Identity, KrylovConfig, Preconditioner, SolveStats};
use crate::operators::{CnFvOperator, Sign};
use crate::preconditioners::{CirculantKind, CirculantPreconditioner, TauPreconditioner};
use crate::problems::ProblemSpec;
use crate::scalar::Scalar;

/// Solver and preconditioner pairing for the linear system of each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cg,
    PcgTau,
    PcgStrang,
    PcgChan,
    Gmres,
    PgmresTau,
    PgmresStrang,
    PgmresChan,
}

/// Preconditioner family, independent of the Krylov method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerKind {
    None,
    Tau,
    Circulant(CirculantKind),
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Cg,
        Method::PcgTau,
        Method::PcgStrang,
        Method::PcgChan,
        Method::Gmres,
        Method::PgmresTau,
        Method::PgmresStrang,
        Method::PgmresChan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cg => "cg",
            Method::PcgTau => "pcg_tau",
            Method::PcgStrang => "pcg_strang",
            Method::PcgChan => "pcg_chan",
            Method::Gmres => "gmres",
            Method::PgmresTau => "pgmres_tau",
            Method::PgmresStrang => "pgmres_strang",
            Method::PgmresChan => "pgmres_chan",
        }
    }

    /// Table heading, e.g. `PCG(tau)`.
    pub fn label(self) -> &'static str {
        match self {
            Method::Cg => "CG",
            Method::PcgTau => "PCG(tau)",
            Method::PcgStrang => "PCG(S)",
            Method::PcgChan => "PCG(T)",
            Method::Gmres => "GMRES",
            Method::PgmresTau => "PGMRES(tau)",
            Method::PgmresStrang => "PGMRES(S)",
            Method::PgmresChan => "PGMRES(T)",
        }
    }

    /// CG-family methods need a symmetric operator.
    pub fn is_cg(self) -> bool {
        matches!(self, Method::Cg | Method::PcgTau | Method::PcgStrang | Method::PcgChan)
    }

    pub fn preconditioner(self) -> PreconditionerKind {
        match self {
            Method::Cg | Method::Gmres => PreconditionerKind::None,
            Method::PcgTau | Method::PgmresTau => PreconditionerKind::Tau,
            Method::PcgStrang | Method::PgmresStrang => PreconditionerKind::Circulant(CirculantKind::Strang),
            Method::PcgChan | Method::PgmresChan => PreconditionerKind::Circulant(CirculantKind::Chan),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Quadrature for the cell-averaged source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum QuadratureRule {
    /// Two Gauss points per axis, exact for cubics.
    #[default]
    Gauss2,
    /// Value at the cell centre (the node).
    Midpoint,
}

/// Krylov starting vector of each time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Previous time level.
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions<T> {
    pub krylov: KrylovConfig<T>,
    pub quadrature: QuadratureRule,
    pub initial_guess: InitialGuess,
}

impl<T: Scalar> Default for SchemeOptions<T> {
    fn default() -> Self {
        Self {
            krylov: KrylovConfig::default(),
            quadrature: QuadratureRule::default(),
            initial_guess: InitialGuess::default(),
        }
    }
}

/// Any of the supported preconditioners behind one type.
#[derive(Debug, Clone)]
pub enum AnyPreconditioner<T: Scalar> {
    Identity,
    Tau(TauPreconditioner<T>),
    Circulant(CirculantPreconditioner<T>),
}

impl<T: Scalar> AnyPreconditioner<T> {
    pub fn assemble(op: &CnFvOperator<T>, kind: PreconditionerKind) -> Result<Self> {
        Ok(match kind {
            PreconditionerKind::None => AnyPreconditioner::Identity,
            PreconditionerKind::Tau => AnyPreconditioner::Tau(TauPreconditioner::assemble(op)?),
            PreconditionerKind::Circulant(c) => {
                AnyPreconditioner::Circulant(CirculantPreconditioner::assemble(op, c)?)
            }
        })
    }
}

impl<T: Scalar> Preconditioner<T> for AnyPreconditioner<T> {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) {
        match self {
            AnyPreconditioner::Identity => Identity.apply_inverse(r, z),
            AnyPreconditioner::Tau(p) => p.apply_inverse_into(r, z),
            AnyPreconditioner::Circulant(p) => p.apply_inverse_into(r, z),
        }
    }
}

/// Cell averages of `f(., t_{m-1/2})` over the control volumes around each
/// interior node.
pub fn cell_average_source<T: Scalar>(
    spec: &ProblemSpec<T>,
    m: usize,
    rule: QuadratureRule,
) -> Result<Field<T>> {
    if m == 0 || m > spec.steps {
        return Err(Error::InvalidParameter(format!(
            "time index {m} outside 1..={}",
            spec.steps
        )));
    }
    let t = (T::of_usize(m) - T::of(0.5)) * spec.dt();
    Ok(cell_average(spec, t, rule))
}

pub(crate) fn cell_average<T: Scalar>(spec: &ProblemSpec<T>, t: T, rule: QuadratureRule) -> Field<T> {
    let grid = &spec.grid;
    let d = grid.dim();
    let f = &spec.source;
    let offsets: Vec<T> = match rule {
        QuadratureRule::Gauss2 => {
            let g = T::one() / T::of(3.0).sqrt() * T::of(0.5);
            vec![-g, g]
        }
        QuadratureRule::Midpoint => vec![T::zero()],
    };
    let weight = T::one() / T::of_usize(offsets.len().pow(d as u32));
    let mut x = vec![T::zero(); d];
    Field::from_fn(grid.shape(), |idx| {
        let mut total = T::zero();
        let mut pick = vec![0usize; d];
        'outer: loop {
            for a in 0..d {
                x[a] = grid.node(a, idx[a]) + offsets[pick[a]] * grid.steps()[a];
            }
            total += f(&x, t);
            for p in pick.iter_mut() {
                *p += 1;
                if *p < offsets.len() {
                    continue 'outer;
                }
                *p = 0;
            }
            break;
        }
        total * weight
    })
}

/// Nodal interpolation of `g` on the interior grid.
pub fn interpolate<T: Scalar>(spec: &ProblemSpec<T>, g: impl Fn(&[T]) -> T) -> Field<T> {
    let grid = &spec.grid;
    let mut x = vec![T::zero(); grid.dim()];
    Field::from_fn(grid.shape(), |idx| {
        for (a, xa) in x.iter_mut().enumerate() {
            *xa = grid.node(a, idx[a]);
        }
        g(&x)
    })
}

/// One Crank-Nicolson step: `A u = op_minus(u_prev) + dt F`, solved by CG
/// when `use_cg` is set and GMRES otherwise.
#[allow(clippy::too_many_arguments)]
pub fn cn_step<T: Scalar>(
    op_plus: &CnFvOperator<T>,
    op_minus: &CnFvOperator<T>,
    precond: &(impl Preconditioner<T> + ?Sized),
    use_cg: bool,
    u_prev: &Field<T>,
    f: &Field<T>,
    guess: InitialGuess,
    cfg: &KrylovConfig<T>,
) -> Result<(Field<T>, SolveStats<T>)> {
    if op_plus.sign() != Sign::Plus || op_minus.sign() != Sign::Minus {
        return Err(Error::InvalidParameter("operator signs are swapped".into()));
    }
    let shape = op_plus.grid().shape();
    u_prev.check_shape(shape)?;
    f.check_shape(shape)?;
    let mut b = op_minus.apply(u_prev)?.into_vec();
    crate::scalar::axpy(op_plus.dt(), f.as_slice(), &mut b);
    let x0 = match guess {
        InitialGuess::Zero => vec![T::zero(); b.len()],
        InitialGuess::Warm => u_prev.as_slice().to_vec(),
    };
    let (u, stats) = if use_cg {
        pcg(op_plus, precond, &b, &x0, cfg)?
    } else {
        gmres_restarted(op_plus, precond, &b, &x0, cfg)?
    };
    Ok((Field::from_vec(shape, u)?, stats))
}

/// Outcome of a full time march.
#[derive(Debug, Clone)]
pub struct SolveReport<T: Scalar> {
    pub method: Method,
    pub orders: Vec<T>,
    pub shape: Vec<usize>,
    pub steps: usize,
    pub per_step: Vec<SolveStats<T>>,
    pub solution: Field<T>,
    /// `max |u - u_exact|` at the final time.
    pub max_error: Option<T>,
    /// `sqrt(prod h_i sum (u - u_exact)^2)` at the final time.
    pub l2_error: Option<T>,
    pub wall_seconds: f64,
}

impl<T: Scalar> SolveReport<T> {
    pub fn mean_iterations(&self) -> f64 {
        if self.per_step.is_empty() {
            return 0.0;
        }
        self.per_step.iter().map(|s| s.iterations as f64).sum::<f64>() / self.per_step.len() as f64
    }

    pub fn converged_all_steps(&self) -> bool {
        self.per_step.iter().all(|s| s.converged)
    }

    pub fn n_plus_1(&self) -> usize {
        self.shape[0] + 1
    }
}

/// Error norms `(max, discrete L2)` of `u` against `exact(., t)`.
pub fn error_norms<T: Scalar>(spec: &ProblemSpec<T>, u: &Field<T>, t: T, exact: impl Fn(&[T], T) -> T) -> (T, T) {
    let e = interpolate(spec, |x| exact(x, t));
    let mut max = T::zero();
    let mut sum = T::zero();
    for (a, b) in u.as_slice().iter().zip(e.as_slice()) {
        let d = *a - *b;
        max = max.max(d.abs());
        sum += d * d;
    }
    (max, (sum * spec.grid.cell_volume()).sqrt())
}

/// Marches `spec` to its horizon with `method`.
pub fn time_march<T: Scalar>(spec: &ProblemSpec<T>, method: Method, opts: &SchemeOptions<T>) -> Result<SolveReport<T>> {
    spec.validate()?;
    opts.krylov.validate()?;
    if method.is_cg() && !spec.is_symmetric() {
        return Err(Error::SymmetryMismatch {
            method: method.name().into(),
        });
    }
    let start = Instant::now();
    let dt = spec.dt();
    let op_plus = CnFvOperator::new(spec.grid.clone(), &spec.orders, &spec.diffusivities, dt)?;
    let op_minus = op_plus.with_sign(Sign::Minus);
    let precond = AnyPreconditioner::assemble(&op_plus, method.preconditioner())?;
    let mut u = interpolate(spec, |x| (spec.initial)(x));
    let mut per_step = Vec::with_capacity(spec.steps);
    for m in 1..=spec.steps {
        let f = cell_average_source(spec, m, opts.quadrature)?;
        let (next, stats) = cn_step(
            &op_plus,
            &op_minus,
            &precond,
            method.is_cg(),
            &u,
            &f,
            opts.initial_guess,
            &opts.krylov,
        )?;
        if next.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time step"));
        }
        u = next;
        per_step.push(stats);
    }
    let (max_error, l2_error) = match &spec.exact {
        Some(ex) => {
            let (m, l) = error_norms(spec, &u, spec.horizon, |x, t| ex(x, t));
            (Some(m), Some(l))
        }
        None => (None, None),
    };
    Ok(SolveReport {
        method,
        orders: spec.orders.iter().map(|o| o.value()).collect(),
        shape: spec.grid.shape().to_vec(),
        steps: spec.steps,
        per_step,
        solution: u,
        max_error,
        l2_error,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `log2(e_coarse / e_fine)` for one refinement by a factor of two.
pub fn observed_order<T: Scalar>(coarse: T, fine: T) -> Result<T> {
    for e in [coarse, fine] {
        if !(e > T::zero()) || !e.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "errors must be positive and finite, got {e}"
            )));
        }
    }
    Ok((coarse / fine).log2())
}

/// Slopes between successive entries of a factor-two refinement sequence.
pub fn observed_orders<T: Scalar>(errors: &[T]) -> Result<Vec<T>> {
    if errors.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two refinement levels".into(),
        ));
    }
    errors.windows(2).map(|w| observed_order(w[0], w[1])).collect()
}

/// Least-squares slope of `log2 e` against the refinement level for a
/// factor-two sequence. With three levels this is the end-to-end slope halved.
pub fn fitted_order<T: Scalar>(errors: &[T]) -> Result<T> {
    let pairs = observed_orders(errors)?;
    let n = errors.len();
    let logs: Vec<T> = errors.iter().map(|e| e.log2()).collect();
    let mean_x = T::of_usize(n - 1) / T::of(2.0);
    let mean_y = logs.iter().copied().sum::<T>() / T::of_usize(n);
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (i, &y) in logs.iter().enumerate() {
        let dx = T::of_usize(i) - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    debug_assert_eq!(pairs.len(), n - 1);
    Ok(-sxy / sxx)
}

/// Errors of one level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementLevel<T> {
    pub n_plus_1: usize,
    pub steps: usize,
    pub max_error: T,
    pub l2_error: T,
    pub mean_iterations: f64,
    pub converged: bool,
}

/// Errors and observed orders over a factor-two refinement sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy<T> {
    pub levels: Vec<RefinementLevel<T>>,
    /// Slopes between neighbouring levels, max norm.
    pub pair_slopes_max: Vec<T>,
    pub pair_slopes_l2: Vec<T>,
    /// Least-squares slope over all levels, max norm.
    pub fitted_max: T,
    pub fitted_l2: T,
}

/// Marches `build(n_plus_1, steps)` for every level and compares against the
/// exact solution at the horizon.
pub fn order_study<T: Scalar>(
    levels: &[(usize, usize)],
    build: impl Fn(usize, usize) -> Result<ProblemSpec<T>>,
    method: Method,
    opts: &SchemeOptions<T>,
) -> Result<OrderStudy<T>> {
    if levels.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "an order study needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    let mut out = Vec::with_capacity(levels.len());
    for &(n1, m) in levels {
        let spec = build(n1, m)?;
        let report = time_march(&spec, method, opts)?;
        let (max_error, l2_error) = match (report.max_error, report.l2_error) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidParameter(
                    "order study needs an exact solution".into(),
                ))
            }
        };
        out.push(RefinementLevel {
            n_plus_1: n1,
            steps: m,
            max_error,
            l2_error,
            mean_iterations: report.mean_iterations(),
            converged: report.converged_all_steps(),
        });
    }
    let max: Vec<T> = out.iter().map(|l| l.max_error).collect();
    let l2: Vec<T> = out.iter().map(|l| l.l2_error).collect();
    Ok(OrderStudy {
        pair_slopes_max: observed_orders(&max)?,
        pair_slopes_l2: observed_orders(&l2)?,
        fitted_max: fitted_order(&max)?,
        fitted_l2: fitted_order(&l2)?,
        levels: out,
    })
}
