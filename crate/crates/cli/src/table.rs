//! Iteration-count tables: one row per `(orders, M, n + 1, method)`.

use std::path::Path;

use fvtau::scheme::{time_march, Method};

use crate::config::ExperimentConfig;
use crate::output::{create_dir, csv_writer, diffusivity_label, opt_exp, orders_label, write_text};
use crate::{CliError, RunSummary};

pub const COLUMNS: [&str; 16] = [
    "orders",
    "M",
    "n_plus_1",
    "method",
    "mean_iters",
    "wall_seconds",
    "final_L2_error",
    "final_max_error",
    "converged_all_steps",
    "problem",
    "diffusivities",
    "tol",
    "restart",
    "initial_guess",
    "quadrature",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub orders: Vec<f64>,
    pub steps: usize,
    pub n_plus_1: usize,
    pub method: Method,
    pub mean_iters: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub l2_error: Option<f64>,
    pub max_error: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl TableRow {
    pub fn failed(&self) -> bool {
        self.error.is_some() || !self.converged
    }
}

/// Runs every cell; solver failures are recorded on their row.
pub fn run_rows(cfg: &ExperimentConfig) -> Result<Vec<TableRow>, CliError> {
    cfg.validate_table()?;
    let example = cfg.example()?;
    let ks = cfg.diffusivities()?;
    let methods = cfg.methods()?;
    let opts = cfg.krylov.options()?;
    let mut rows = Vec::new();
    for orders in &cfg.orders {
        for &m in &cfg.steps {
            for &n1 in &cfg.grid {
                for &method in &methods {
                    let outcome = example
                        .problem(orders, &ks, n1, m)
                        .and_then(|spec| time_march(&spec, method, &opts));
                    let row = match outcome {
                        Ok(r) => TableRow {
                            orders: orders.clone(),
                            steps: m,
                            n_plus_1: n1,
                            method,
                            mean_iters: Some(r.mean_iterations()),
                            wall_seconds: Some(r.wall_seconds),
                            l2_error: r.l2_error,
                            max_error: r.max_error,
                            converged: r.converged_all_steps(),
                            error: None,
                        },
                        Err(e) => TableRow {
                            orders: orders.clone(),
                            steps: m,
                            n_plus_1: n1,
                            method,
                            mean_iters: None,
                            wall_seconds: None,
                            l2_error: None,
                            max_error: None,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                    };
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// Writes `table.csv` and `table.md` under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, CliError> {
    let rows = run_rows(cfg)?;
    create_dir(out)?;
    let csv_path = out.join("table.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(COLUMNS)?;
    let ks = diffusivity_label(&cfg.diffusivities()?);
    for r in &rows {
        w.write_record([
            orders_label(&r.orders),
            r.steps.to_string(),
            r.n_plus_1.to_string(),
            r.method.name().to_string(),
            r.mean_iters.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.wall_seconds.map(|v| format!("{v:.4}")).unwrap_or_default(),
            opt_exp(r.l2_error),
            opt_exp(r.max_error),
            r.converged.to_string(),
            cfg.problem.clone(),
            ks.clone(),
            format!("{:e}", cfg.krylov.tol),
            cfg.krylov.restart.to_string(),
            cfg.krylov.initial_guess.clone(),
            cfg.krylov.quadrature.clone(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: csv_path.clone(),
        source,
    })?;
    let md_path = write_text(&out.join("table.md"), &markdown(&rows, &cfg.methods()?))?;
    Ok(RunSummary {
        files: vec![csv_path, md_path],
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| r.failed()).count(),
    })
}

/// One line per `(orders, M, n + 1)` with an iteration and a CPU column per
/// method. Non-converged cells carry `*`, failed ones `fail`.
pub fn markdown(rows: &[TableRow], methods: &[Method]) -> String {
    let mut s = String::from("| orders | M | n+1 |");
    for m in methods {
        s.push_str(&format!(" {} Iter | {} CPU(s) |", m.label(), m.label()));
    }
    s.push_str("\n|---|---|---|");
    s.push_str(&"---|---|".repeat(methods.len()));
    s.push('\n');
    for group in rows.chunks(methods.len().max(1)) {
        let head = &group[0];
        s.push_str(&format!(
            "| {} | {} | {} |",
            orders_label(&head.orders),
            head.steps,
            head.n_plus_1
        ));
        for r in group {
            match (r.mean_iters, r.wall_seconds) {
                (Some(it), Some(t)) => {
                    let mark = if r.converged { "" } else { "*" };
                    s.push_str(&format!(" {it:.2}{mark} | {t:.3} |"));
                }
                _ => s.push_str(" fail | - |"),
            }
        }
        s.push('\n');
    }
    s
}
