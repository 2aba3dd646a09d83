use std::process::ExitCode;
use std::time::Instant;

use fvtau::analysis::{
    compute_bounds, dense_preconditioned_spectrum, paired_residual_violation, rate_envelope_violation,
    symbol_lerch, symbol_truncated_many, theta_grid, SymbolEvaluation, SymbolMethod,
};
use fvtau::coeffs::{CoefficientTable, FractionalOrder};
use fvtau::dense::DenseMatrix;
use fvtau::krylov::{gmres_restarted, gmres_two_sided, InverseSqrt, KrylovConfig};
use fvtau::operators::{CnFvOperator, Diffusivity, GridSpec, ToeplitzOperator};
use fvtau::preconditioners::TauPreconditioner;
use fvtau::problems::{Example, ProblemSpec};
use fvtau::scheme::{order_study, time_march, Method, SchemeOptions};
use fvtau::transforms::{sine_matrix, tensor_dst_apply, SineTransformPlan};
use fvtau::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ord(d: f64) -> FractionalOrder<f64> {
    FractionalOrder::new(d).unwrap()
}

fn operator(shape: &[usize], orders: &[f64], k: &[(f64, f64)], dt: f64) -> Result<CnFvOperator<f64>, String> {
    let grid = GridSpec::unit(shape).map_err(|e| e.to_string())?;
    let orders: Vec<_> = orders.iter().map(|&d| ord(d)).collect();
    let ks: Vec<_> = k.iter().map(|&(p, m)| Diffusivity { plus: p, minus: m }).collect();
    CnFvOperator::new(grid, &orders, &ks, dt).map_err(|e| e.to_string())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn mean_iters(spec: &ProblemSpec<f64>, method: Method) -> Result<f64, String> {
    let r = time_march(spec, method, &SchemeOptions::default()).map_err(|e| e.to_string())?;
    if !r.converged_all_steps() {
        return Err(format!("{} did not converge on every step", method.label()));
    }
    Ok(r.mean_iterations())
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn small_3d_symmetric_cell() -> Outcome {
    let start = Instant::now();
    let spec = Example::Ex2
        .problem(&[0.1, 0.2, 0.3], &Example::Ex2.symmetric_diffusivities(), 8, 4)
        .map_err(|e| e.to_string())?;
    let tau = mean_iters(&spec, Method::PcgTau)?;
    let cg = mean_iters(&spec, Method::Cg)?;
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("PCG(tau) {tau:.2} in [3,7], CG {cg:.2} in [13,21], {secs:.2}s < 10s");
    if within(tau, 3.0, 7.0) && within(cg, 13.0, 21.0) && secs < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn symmetric_2d_cells() -> Outcome {
    let k = Example::Ex1.symmetric_diffusivities();
    let mut parts = Vec::new();
    let mut ok = true;
    for (orders, lo, hi) in [([0.1, 0.2], 4.0, 8.0), ([0.4, 0.5], 5.0, 9.0)] {
        let at = |n1| -> Result<f64, String> {
            let spec = Example::Ex1.problem(&orders, &k, n1, 8).map_err(|e| e.to_string())?;
            mean_iters(&spec, Method::PcgTau)
        };
        let (a, b) = (at(64)?, at(128)?);
        ok &= within(a, lo, hi) && (b - a).abs() <= 2.0;
        parts.push(format!("{orders:?}: {a:.2} in [{lo},{hi}], n+1=128 {b:.2}"));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn nonsymmetric_cells() -> Outcome {
    let spec2 = Example::Ex1
        .problem(&[0.1, 0.2], &Example::Ex1.nonsymmetric_diffusivities(), 64, 8)
        .map_err(|e| e.to_string())?;
    let spec3 = Example::Ex2
        .problem(&[0.1, 0.2, 0.3], &Example::Ex2.nonsymmetric_diffusivities(), 8, 4)
        .map_err(|e| e.to_string())?;
    let tau2 = mean_iters(&spec2, Method::PgmresTau)?;
    let tau3 = mean_iters(&spec3, Method::PgmresTau)?;
    let strang = mean_iters(&spec2, Method::PgmresStrang)?;
    let chan = mean_iters(&spec2, Method::PgmresChan)?;
    let msg = format!(
        "2D PGMRES(tau) {tau2:.2}, 3D {tau3:.2} (6 +/- 2); 2D PGMRES(S) {strang:.2}, PGMRES(T) {chan:.2} > {tau2:.2}"
    );
    if (tau2 - 6.0).abs() <= 2.0 && (tau3 - 6.0).abs() <= 2.0 && strang > tau2 && chan > tau2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn spectral_bounds() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_404);
    let mut herm_margin = f64::INFINITY;
    let mut skew_margin = f64::INFINITY;
    for _ in 0..20 {
        let d = rng.gen_range(2..=3);
        let shape: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=6)).collect();
        let orders: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..0.99)).collect();
        let k: Vec<(f64, f64)> = (0..d).map(|_| (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0))).collect();
        let dt = 10f64.powf(rng.gen_range(-3.0..0.5));
        let op = operator(&shape, &orders, &k, dt)?;
        let p = TauPreconditioner::assemble(&op).map_err(|e| e.to_string())?;
        let r = dense_preconditioned_spectrum(&op, &p).map_err(|e| e.to_string())?;
        herm_margin = herm_margin.min(r.hermitian_margin(0.5, 1.5).unwrap());
        skew_margin = skew_margin.min(r.skew_margin().unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "20 draws: min Hermitian margin {herm_margin:.3e}, min skew margin {skew_margin:.3e} (>= 1e-10), {secs:.2}s < 60s"
    );
    if herm_margin >= 1e-10 && skew_margin >= 1e-10 && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rate_envelope() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let factor = 2.0 * 2f64.sqrt();
    let mut worst_ratio: f64 = 0.0;
    let mut steps = Vec::new();
    for _ in 0..5 {
        let d = rng.gen_range(2..=3);
        let shape: Vec<usize> = (0..d).map(|_| rng.gen_range(4..=8)).collect();
        let orders: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..0.9)).collect();
        let k: Vec<(f64, f64)> = (0..d).map(|_| (rng.gen_range(1.0..30.0), rng.gen_range(1.0..30.0))).collect();
        let op = operator(&shape, &orders, &k, rng.gen_range(0.01..1.0))?;
        let p = TauPreconditioner::assemble(&op).map_err(|e| e.to_string())?;
        let omega = compute_bounds(&op.orders(), &op.diffusivities()).map_err(|e| e.to_string())?.omega;
        let n = op.len();
        let b = random_vec(&mut rng, n);
        let zero = vec![0.0; n];
        let cfg = KrylovConfig { tol: 1e-10, maxit: Some(n), restart: n };
        let (_, two) = gmres_two_sided(&op, &InverseSqrt(&p), &b, &zero, &cfg).map_err(|e| e.to_string())?;
        let (_, one) = gmres_restarted(&op, &p, &b, &zero, &cfg).map_err(|e| e.to_string())?;
        let (h2, h1) = (two.absolute_history(), one.absolute_history());
        if let Some(k) = rate_envelope_violation(&h2, omega, 0.0) {
            return Err(format!("envelope broken at k = {k} on shape {shape:?}"));
        }
        if let Some(j) = paired_residual_violation(&h1, &h2, factor, 0.0) {
            return Err(format!("one-sided residual exceeds 2 sqrt 2 two-sided at j = {j} on shape {shape:?}"));
        }
        for (a, b) in h1.iter().zip(&h2) {
            worst_ratio = worst_ratio.max(a / b);
        }
        steps.push(two.iterations);
    }
    Ok(format!("5 instances, two-sided iterations {steps:?}, max one/two ratio {worst_ratio:.3} <= {factor:.3}"))
}

fn symbol_sector() -> Outcome {
    let thetas: Vec<f64> = theta_grid(50);
    let mut worst: f64 = 0.0;
    let mut closed_in = 0;
    let mut series_in = 0;
    let mut min_gap = f64::INFINITY;
    for d in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let o = ord(d);
        let series = symbol_truncated_many(o, &thetas, 100_000).map_err(|e| e.to_string())?;
        for (&th, &s) in thetas.iter().zip(&series) {
            let c = symbol_lerch(o, th).map_err(|e| e.to_string())?;
            worst = worst.max((c - s).norm());
            let closed = SymbolEvaluation { order: o, theta: th, value: c, method: SymbolMethod::LerchClosedForm };
            let trunc = SymbolEvaluation { order: o, theta: th, value: s, method: SymbolMethod::TruncatedSeries };
            closed_in += usize::from(closed.in_sector());
            series_in += usize::from(trunc.in_sector());
            min_gap = min_gap.min(1.0 - closed.sector_ratio() / closed.sector_bound());
        }
    }
    // the sector is judged on the closed form; near theta = 0 at delta = 0.9
    // the gap to tan(delta pi/2) is below the truncation error of the series
    let msg = format!(
        "250 samples, max |series - closed form| {worst:.2e} <= 1e-6; closed form in sector {closed_in}/250 \
         (min relative gap {min_gap:.1e}); truncated series in sector {series_in}/250"
    );
    if worst <= 1e-6 && closed_in == 250 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn coefficient_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let d = rng.gen_range(0.001..0.999);
        let n = rng.gen_range(2..=512);
        let t = CoefficientTable::new(ord(d), n).map_err(|e| e.to_string())?;
        let bad = t.invariant_violations();
        if !bad.is_empty() {
            return Err(format!("delta = {d}, n = {n}: {}", bad.join(", ")));
        }
    }
    Ok("1000 draws, all invariants hold".into())
}

fn kernel_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;

    // Toeplitz matvec, n = 4096
    let n = 4096;
    let column = random_vec(&mut rng, n);
    let mut row = random_vec(&mut rng, n);
    row[0] = column[0];
    let t = ToeplitzOperator::from_column_row(&column, &row).map_err(|e| e.to_string())?;
    let x = random_vec(&mut rng, n);
    let naive: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| if i >= j { column[i - j] } else { row[j - i] } * x[j]).sum())
        .collect();
    worst = worst.max(rel_err(&t.matvec(&x, false).map_err(|e| e.to_string())?, &naive));

    for shape in [vec![64usize, 64], vec![16, 16, 16]] {
        let len: usize = shape.iter().product();
        // DST involution and orthogonality
        let plans: Vec<_> = shape.iter().map(|&m| SineTransformPlan::new(m).unwrap()).collect();
        let u = Field::from_vec(&shape, random_vec(&mut rng, len)).map_err(|e| e.to_string())?;
        let once = tensor_dst_apply(&plans, &u).map_err(|e| e.to_string())?;
        let twice = tensor_dst_apply(&plans, &once).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(twice.as_slice(), u.as_slice()));
        worst = worst.max((once.norm2() - u.norm2()).abs() / u.norm2());

        // operator against its dense materialization
        let k = [(19.0, 21.0), (21.0, 23.0), (23.0, 25.0)];
        let op = operator(&shape, &[0.2, 0.5, 0.8][..shape.len()], &k[..shape.len()], 1.0 / 32.0)?;
        let a = op.materialize_dense().map_err(|e| e.to_string())?;
        let x = random_vec(&mut rng, len);
        let mut y = vec![0.0; len];
        op.apply_into(&x, &mut y);
        worst = worst.max(rel_err(&y, &a.matvec(&x)));

        // tau inverse: P y = x with P = S Lambda S from the dense transform
        let p = TauPreconditioner::assemble(&op).map_err(|e| e.to_string())?;
        let s = DenseMatrix::kron_axes(&shape.iter().map(|&m| sine_matrix(m)).collect::<Vec<_>>());
        let mut z = vec![0.0; len];
        p.apply_inverse_into(&x, &mut z);
        let mut w = s.matvec(&z);
        for (v, &l) in w.iter_mut().zip(p.eigen_tensor()) {
            *v *= l;
        }
        worst = worst.max(rel_err(&s.matvec(&w), &x));
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("N up to 4096, max relative error {worst:.2e} <= 1e-11, {secs:.2}s < 30s");
    if worst <= 1e-11 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn convergence_orders() -> Outcome {
    let start = Instant::now();
    let opts = SchemeOptions::default();
    let sym = Example::Ex1.symmetric_diffusivities::<f64>();
    let nonsym = Example::Ex1.nonsymmetric_diffusivities::<f64>();
    let err = |e: fvtau::Error| e.to_string();

    let temporal = order_study(
        &[(256, 4), (256, 8), (256, 16)],
        |n1, m| Example::Ex1.problem(&[0.5, 0.5], &sym, n1, m),
        Method::PcgTau,
        &opts,
    )
    .map_err(err)?;
    let spatial_levels = [(16, 16), (32, 32), (64, 64)];
    let spatial = order_study(
        &spatial_levels,
        |n1, m| Example::Ex1.problem(&[0.5, 0.5], &sym, n1, m),
        Method::PcgTau,
        &opts,
    )
    .map_err(err)?;
    let skewed = order_study(
        &spatial_levels,
        |n1, m| Example::Ex1.problem(&[0.5, 0.5], &nonsym, n1, m),
        Method::PgmresTau,
        &opts,
    )
    .map_err(err)?;
    let secs = start.elapsed().as_secs_f64();

    let near_two = |v: f64| (v - 2.0).abs() <= 0.2;
    let ok = near_two(temporal.fitted_max)
        && near_two(temporal.fitted_l2)
        && near_two(spatial.fitted_max)
        && near_two(spatial.fitted_l2)
        && skewed.fitted_max >= 1.3
        && skewed.fitted_l2 >= 1.3
        && secs < 300.0;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");
    let msg = format!(
        "temporal {:.2} (pairs {}), spatial sym {:.2} (pairs {}), spatial non-sym {:.2} (pairs {}), max norm; {secs:.1}s < 300s",
        temporal.fitted_max,
        fmt(&temporal.pair_slopes_max),
        spatial.fitted_max,
        fmt(&spatial.pair_slopes_max),
        skewed.fitted_max,
        fmt(&skewed.pair_slopes_max),
    );
    if ok {
        Ok(msg)
    } else {
        Err(format!(
            "{msg}; L2 fitted {:.2}/{:.2}/{:.2}",
            temporal.fitted_l2, spatial.fitted_l2, skewed.fitted_l2
        ))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("small 3D symmetric cell", small_3d_symmetric_cell),
        ("2D symmetric cells and flatness", symmetric_2d_cells),
        ("non-symmetric cells and circulant baselines", nonsymmetric_cells),
        ("preconditioned spectral bounds", spectral_bounds),
        ("GMRES rate envelope and one/two-sided relation", rate_envelope),
        ("symbol series, closed form and sector", symbol_sector),
        ("coefficient sign and monotonicity properties", coefficient_properties),
        ("kernel oracles", kernel_oracles),
        ("convergence orders", convergence_orders),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {}: {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}: {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
