//! Temporal and spatial refinement studies against the exact solution.

use std::path::Path;

use fvtau::scheme::{order_study, OrderStudy};

use crate::config::ExperimentConfig;
use crate::output::{create_dir, csv_writer, diffusivity_label, orders_label};
use crate::{CliError, RunSummary};

pub const COLUMNS: [&str; 17] = [
    "study",
    "problem",
    "orders",
    "diffusivities",
    "method",
    "n_plus_1",
    "M",
    "max_error",
    "l2_error",
    "mean_iters",
    "converged_all_steps",
    "slope_max",
    "slope_l2",
    "fitted_max",
    "fitted_l2",
    "tol",
    "error",
];

/// `(name, [(n_plus_1, M)])` for each non-empty study.
pub fn levels(cfg: &ExperimentConfig) -> Vec<(&'static str, Vec<(usize, usize)>)> {
    let o = &cfg.order;
    let mut out = Vec::new();
    if !o.temporal_steps.is_empty() {
        out.push(("temporal", o.temporal_steps.iter().map(|&m| (o.temporal_grid, m)).collect()));
    }
    if !o.spatial_grid.is_empty() {
        out.push(("spatial", o.spatial_grid.iter().map(|&n| (n, n * o.steps_per_cell)).collect()));
    }
    out
}

/// Writes `order.csv` under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, CliError> {
    cfg.validate_order()?;
    let example = cfg.example()?;
    let ks = cfg.diffusivities()?;
    let orders = cfg.order_orders()?;
    let method = cfg.order_method()?;
    let opts = cfg.krylov.options()?;
    create_dir(out)?;
    let path = out.join("order.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(COLUMNS)?;
    let prefix = |study: &str| {
        vec![
            study.to_string(),
            cfg.problem.clone(),
            orders_label(&orders),
            diffusivity_label(&ks),
            method.name().to_string(),
        ]
    };
    let (mut rows, mut failed) = (0, 0);
    for (study, lv) in levels(cfg) {
        let result: fvtau::Result<OrderStudy<f64>> =
            order_study(&lv, |n1, m| example.problem(&orders, &ks, n1, m), method, &opts);
        match result {
            Ok(s) => {
                for (i, l) in s.levels.iter().enumerate() {
                    let slope = |v: &[f64]| i.checked_sub(1).map(|j| v[j].to_string()).unwrap_or_default();
                    let mut rec = prefix(study);
                    rec.extend([
                        l.n_plus_1.to_string(),
                        l.steps.to_string(),
                        format!("{:e}", l.max_error),
                        format!("{:e}", l.l2_error),
                        format!("{:.2}", l.mean_iterations),
                        l.converged.to_string(),
                        slope(&s.pair_slopes_max),
                        slope(&s.pair_slopes_l2),
                        s.fitted_max.to_string(),
                        s.fitted_l2.to_string(),
                        format!("{:e}", cfg.krylov.tol),
                        String::new(),
                    ]);
                    w.write_record(&rec)?;
                    rows += 1;
                    failed += usize::from(!l.converged);
                }
            }
            Err(e) => {
                let mut rec = prefix(study);
                rec.extend(std::iter::repeat(String::new()).take(COLUMNS.len() - rec.len() - 2));
                rec.extend([format!("{:e}", cfg.krylov.tol), e.to_string()]);
                w.write_record(&rec)?;
                rows += 1;
                failed += 1;
            }
        }
    }
    w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(RunSummary { files: vec![path], rows, failed_rows: failed })
}
