use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fvtau::analysis::varsigma;
use fvtau::coeffs::FractionalOrder;
use fvtau::operators::Diffusivity;
use tempfile::TempDir;

fn fvtau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvtau")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (head, rows)
}

fn col(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// `(0.1, 0.2)` -> `[0.1, 0.2]`.
fn parse_orders(s: &str) -> Vec<f64> {
    s.trim_matches(|c| c == '(' || c == ')')
        .split(", ")
        .map(|v| v.parse().unwrap())
        .collect()
}

/// `(1,2) (3,4)` -> pairs.
fn parse_diffusivities(s: &str) -> Vec<Diffusivity<f64>> {
    s.split(' ')
        .map(|pair| {
            let v: Vec<f64> = pair
                .trim_matches(|c| c == '(' || c == ')')
                .split(',')
                .map(|x| x.parse().unwrap())
                .collect();
            Diffusivity::new(v[0], v[1]).unwrap()
        })
        .collect()
}

const SMALL_3D: &str = r#"
problem = "ex2"
orders = [[0.1, 0.2, 0.3]]
grid = [8]
steps = [4]
methods = ["cg", "pcg_tau", "pcg_strang", "pcg_chan"]
"#;

#[test]
fn table_reproduces_small_3d_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", SMALL_3D);
    let out = tmp.path().join("out");
    let o = fvtau(&["table", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = read_csv(&out.join("table.csv"));
    assert_eq!(
        &head[..9],
        [
            "orders",
            "M",
            "n_plus_1",
            "method",
            "mean_iters",
            "wall_seconds",
            "final_L2_error",
            "final_max_error",
            "converged_all_steps"
        ]
    );
    let iters: Vec<&str> = rows.iter().map(|r| r[col(&head, "mean_iters")].as_str()).collect();
    assert_eq!(iters, ["17.00", "5.00", "13.00", "12.00"]);
    assert!(rows.iter().all(|r| r[col(&head, "converged_all_steps")] == "true"));
    let md = fs::read_to_string(out.join("table.md")).unwrap();
    assert!(md.contains("PCG(tau) Iter"));
    assert!(md.contains("| (0.1, 0.2, 0.3) | 4 | 8 | 17.00 |"));
}

#[test]
fn table_is_deterministic_apart_from_timing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", SMALL_3D);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        assert_eq!(fvtau(&["table", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
        let (head, mut rows) = read_csv(&out.join("table.csv"));
        let t = col(&head, "wall_seconds");
        for r in &mut rows {
            r[t].clear();
        }
        runs.push(rows);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn empty_method_list_is_a_config_error_without_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "e.toml", "orders = [[0.1, 0.2]]\ngrid = [8]\nsteps = [4]\nmethods = []\n");
    let out = tmp.path().join("out");
    let o = fvtau(&["table", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("methods"));
    assert!(!out.join("table.csv").exists());
}

#[test]
fn parse_errors_carry_line_and_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "grid = [8,\n  \"x\"]\n");
    let o = fvtau(&["table", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let cfg = write_config(tmp.path(), "typo.toml", "methodz = [\"cg\"]\n");
    let o = fvtau(&["table", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("methodz"));
}

#[test]
fn solver_refusal_is_recorded_and_exits_1() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ns.toml",
        "diffusivities = \"nonsymmetric\"\norders = [[0.3, 0.6]]\ngrid = [8]\nsteps = [2]\nmethods = [\"cg\", \"pgmres_tau\"]\n",
    );
    let out = tmp.path().join("out");
    let o = fvtau(&["table", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let (head, rows) = read_csv(&out.join("table.csv"));
    let err = col(&head, "error");
    assert!(!rows[0][err].is_empty());
    assert_eq!(rows[1][err], "");
    assert_eq!(rows[1][col(&head, "converged_all_steps")], "true");
}

#[test]
fn output_dir_from_config() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("from_cfg");
    let body = format!("{SMALL_3D}output_dir = {:?}\nmethods = [\"pcg_tau\"]\n", out.to_str().unwrap())
        .replace("methods = [\"cg\", \"pcg_tau\", \"pcg_strang\", \"pcg_chan\"]\n", "");
    let cfg = write_config(tmp.path(), "t.toml", &body);
    assert_eq!(fvtau(&["table", "--config", &cfg]).status.code(), Some(0));
    assert!(out.join("table.csv").exists());
}

#[test]
fn verify_defaults_pass_and_varsigma_recomputes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "seed = 11\n");
    let out = tmp.path().join("out");
    let o = fvtau(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let (head, rows) = read_csv(&out.join("bounds.csv"));
    assert_eq!(rows.len(), 20);
    for r in &rows {
        for c in ["hermitian_pass", "skew_pass", "envelope_pass", "relation_pass"] {
            assert_eq!(r[col(&head, c)], "true", "{c} on {r:?}");
        }
        let orders: Vec<FractionalOrder<f64>> = parse_orders(&r[col(&head, "orders")])
            .into_iter()
            .map(|d| FractionalOrder::new(d).unwrap())
            .collect();
        let ks = parse_diffusivities(&r[col(&head, "diffusivities")]);
        let want = varsigma(&orders, &ks).unwrap();
        let got: f64 = r[col(&head, "varsigma")].parse().unwrap();
        assert!((got - want).abs() <= 1e-14, "{got} vs {want}");
    }
    let (shead, srows) = read_csv(&out.join("symbol.csv"));
    assert_eq!(srows.len(), 250);
    assert!(srows.iter().all(|r| r[col(&shead, "closed_in_sector")] == "true"));
}

#[test]
fn symmetric_verify_has_zero_skew() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "[verify]\nsymmetric = true\ndraws = 8\nsymbol_points = 0\n");
    let out = tmp.path().join("out");
    assert_eq!(fvtau(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let (head, rows) = read_csv(&out.join("bounds.csv"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(r[col(&head, "skew_radius")].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[col(&head, "varsigma")].parse::<f64>().unwrap(), 0.0);
    }
    assert!(!out.join("symbol.csv").exists());
}

#[test]
fn verify_guard_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "[verify]\nmax_n = 12\n");
    let out = tmp.path().join("out");
    assert_eq!(fvtau(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn spatial_order_study_on_small_grids() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "o.toml",
        "[order]\ntemporal_steps = []\nspatial_grid = [8, 16, 32]\n",
    );
    let out = tmp.path().join("out");
    let o = fvtau(&["order", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = read_csv(&out.join("order.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[col(&head, "study")] == "spatial"));
    assert_eq!(rows[0][col(&head, "slope_max")], "");
    let fitted: f64 = rows[0][col(&head, "fitted_max")].parse().unwrap();
    assert!((fitted - 2.0).abs() < 0.3, "{fitted}");
    let errs: Vec<f64> = rows.iter().map(|r| r[col(&head, "max_error")].parse().unwrap()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
}

#[test]
fn order_study_needs_three_levels() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "o.toml", "[order]\ntemporal_steps = []\nspatial_grid = [8, 16]\n");
    let out = tmp.path().join("out");
    assert_eq!(fvtau(&["order", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert!(!out.exists());
}
