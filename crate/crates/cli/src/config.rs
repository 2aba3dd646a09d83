//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use fvtau::analysis::EIGEN_GUARD;
use fvtau::krylov::KrylovConfig;
use fvtau::operators::Diffusivity;
use fvtau::problems::Example;
use fvtau::scheme::{InitialGuess, Method, QuadratureRule, SchemeOptions};
use serde::Deserialize;

use crate::CliError;

/// Largest `n + 1` accepted without `allow_large`, per dimension.
pub const CAP_2D: usize = 256;
pub const CAP_3D: usize = 32;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_problem")]
    pub problem: String,
    /// One order tuple per sweep entry.
    #[serde(default)]
    pub orders: Vec<Vec<f64>>,
    #[serde(default)]
    pub diffusivities: DiffusivityChoice,
    /// `n + 1` values.
    #[serde(default)]
    pub grid: Vec<usize>,
    /// `M` values.
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub krylov: KrylovSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Lifts the desk-scale grid caps.
    #[serde(default)]
    pub allow_large: bool,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub order: OrderSection,
}

fn default_problem() -> String {
    "ex1".into()
}

/// `"symmetric"`, `"nonsymmetric"` or explicit `[[k_plus, k_minus], ...]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DiffusivityChoice {
    Named(String),
    Explicit(Vec<[f64; 2]>),
}

impl Default for DiffusivityChoice {
    fn default() -> Self {
        DiffusivityChoice::Named("symmetric".into())
    }
}

impl DiffusivityChoice {
    pub fn resolve(&self, example: Example) -> Result<Vec<Diffusivity<f64>>, CliError> {
        match self {
            DiffusivityChoice::Named(s) => match s.as_str() {
                "symmetric" => Ok(example.symmetric_diffusivities()),
                "nonsymmetric" => Ok(example.nonsymmetric_diffusivities()),
                other => Err(CliError::Config(format!(
                    "diffusivities: expected \"symmetric\", \"nonsymmetric\" or a list of pairs, got \"{other}\""
                ))),
            },
            DiffusivityChoice::Explicit(pairs) => {
                if pairs.len() != example.dim() {
                    return Err(CliError::Config(format!(
                        "diffusivities: {} needs {} pairs, got {}",
                        example,
                        example.dim(),
                        pairs.len()
                    )));
                }
                pairs
                    .iter()
                    .map(|&[p, m]| {
                        Diffusivity::new(p, m).map_err(|e| CliError::Config(format!("diffusivities: {e}")))
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to the system size.
    #[serde(default)]
    pub maxit: Option<usize>,
    #[serde(default = "default_restart")]
    pub restart: usize,
    /// `"zero"` or `"warm"`.
    #[serde(default = "default_guess")]
    pub initial_guess: String,
    /// `"gauss2"` or `"midpoint"`.
    #[serde(default = "default_quadrature")]
    pub quadrature: String,
}

fn default_tol() -> f64 {
    1e-9
}
fn default_restart() -> usize {
    20
}
fn default_guess() -> String {
    "zero".into()
}
fn default_quadrature() -> String {
    "gauss2".into()
}

impl Default for KrylovSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            maxit: None,
            restart: default_restart(),
            initial_guess: default_guess(),
            quadrature: default_quadrature(),
        }
    }
}

impl KrylovSection {
    pub fn options(&self) -> Result<SchemeOptions<f64>, CliError> {
        let krylov = KrylovConfig {
            tol: self.tol,
            maxit: self.maxit,
            restart: self.restart,
        };
        krylov
            .validate()
            .map_err(|e| CliError::Config(format!("krylov: {e}")))?;
        let initial_guess = match self.initial_guess.as_str() {
            "zero" => InitialGuess::Zero,
            "warm" => InitialGuess::Warm,
            other => {
                return Err(CliError::Config(format!(
                    "krylov.initial_guess: expected \"zero\" or \"warm\", got \"{other}\""
                )))
            }
        };
        let quadrature = match self.quadrature.as_str() {
            "gauss2" => QuadratureRule::Gauss2,
            "midpoint" => QuadratureRule::Midpoint,
            other => {
                return Err(CliError::Config(format!(
                    "krylov.quadrature: expected \"gauss2\" or \"midpoint\", got \"{other}\""
                )))
            }
        };
        Ok(SchemeOptions {
            krylov,
            quadrature,
            initial_guess,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Random dense instances.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Per-axis interior points are drawn from `1..=max_n`.
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    /// Draw `k_+ = k_-` on every axis.
    #[serde(default)]
    pub symmetric: bool,
    /// Angles per order in the symbol check; 0 skips it.
    #[serde(default = "default_symbol_points")]
    pub symbol_points: usize,
    #[serde(default = "default_symbol_orders")]
    pub symbol_orders: Vec<f64>,
    #[serde(default = "default_symbol_terms")]
    pub symbol_terms: usize,
}

fn default_draws() -> usize {
    20
}
fn default_max_n() -> usize {
    6
}
fn default_symbol_points() -> usize {
    50
}
fn default_symbol_orders() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}
fn default_symbol_terms() -> usize {
    100_000
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            draws: default_draws(),
            max_n: default_max_n(),
            symmetric: false,
            symbol_points: default_symbol_points(),
            symbol_orders: default_symbol_orders(),
            symbol_terms: default_symbol_terms(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSection {
    /// Orders used by both studies; defaults to 0.5 on every axis.
    #[serde(default)]
    pub orders: Option<Vec<f64>>,
    /// Defaults to `pcg_tau` or `pgmres_tau` by symmetry.
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default = "default_temporal_grid")]
    pub temporal_grid: usize,
    #[serde(default = "default_temporal_steps")]
    pub temporal_steps: Vec<usize>,
    /// `n + 1` levels; `M = steps_per_cell * (n + 1)` keeps `dt` proportional to `h`.
    #[serde(default = "default_spatial_grid")]
    pub spatial_grid: Vec<usize>,
    #[serde(default = "default_steps_per_cell")]
    pub steps_per_cell: usize,
}

fn default_temporal_grid() -> usize {
    256
}
fn default_temporal_steps() -> Vec<usize> {
    vec![4, 8, 16]
}
fn default_spatial_grid() -> Vec<usize> {
    vec![16, 32, 64]
}
fn default_steps_per_cell() -> usize {
    1
}

impl Default for OrderSection {
    fn default() -> Self {
        Self {
            orders: None,
            method: None,
            temporal_grid: default_temporal_grid(),
            temporal_steps: default_temporal_steps(),
            spatial_grid: default_spatial_grid(),
            steps_per_cell: default_steps_per_cell(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn example(&self) -> Result<Example, CliError> {
        self.problem
            .parse()
            .map_err(|e| CliError::Config(format!("problem: {e}")))
    }

    pub fn diffusivities(&self) -> Result<Vec<Diffusivity<f64>>, CliError> {
        self.diffusivities.resolve(self.example()?)
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("methods: empty list, nothing to run".into()));
        }
        self.methods
            .iter()
            .map(|m| m.parse().map_err(|e| CliError::Config(format!("methods: {e}"))))
            .collect()
    }

    /// Validates one order tuple against the problem dimension.
    pub fn check_orders(&self, key: &str, orders: &[f64]) -> Result<(), CliError> {
        let d = self.example()?.dim();
        if orders.len() != d {
            return Err(CliError::Config(format!(
                "{key}: {} needs {d} orders, got {orders:?}",
                self.problem
            )));
        }
        if let Some(bad) = orders.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(CliError::Config(format!("{key}: order {bad} outside (0, 1)")));
        }
        Ok(())
    }

    /// Rejects grids beyond the desk-scale caps unless `allow_large` is set.
    pub fn check_grid(&self, key: &str, n_plus_1: usize) -> Result<(), CliError> {
        if n_plus_1 < 3 {
            return Err(CliError::Config(format!("{key}: n + 1 = {n_plus_1} is below 3")));
        }
        let cap = if self.example()?.dim() == 3 { CAP_3D } else { CAP_2D };
        if n_plus_1 > cap && !self.allow_large {
            return Err(CliError::Config(format!(
                "{key}: n + 1 = {n_plus_1} exceeds the cap {cap} for {}; set allow_large = true to run it",
                self.problem
            )));
        }
        Ok(())
    }

    /// Everything `table` needs, checked before any output is written.
    pub fn validate_table(&self) -> Result<(), CliError> {
        self.methods()?;
        self.diffusivities()?;
        self.krylov.options()?;
        if self.orders.is_empty() {
            return Err(CliError::Config("orders: empty list".into()));
        }
        for o in &self.orders {
            self.check_orders("orders", o)?;
        }
        if self.grid.is_empty() {
            return Err(CliError::Config("grid: empty list".into()));
        }
        for &g in &self.grid {
            self.check_grid("grid", g)?;
        }
        if self.steps.is_empty() || self.steps.contains(&0) {
            return Err(CliError::Config("steps: need at least one positive M".into()));
        }
        Ok(())
    }

    pub fn validate_verify(&self) -> Result<(), CliError> {
        let v = &self.verify;
        if v.draws == 0 {
            return Err(CliError::Config("verify.draws: must be at least 1".into()));
        }
        if v.max_n == 0 || v.max_n.pow(3) > EIGEN_GUARD {
            return Err(CliError::Config(format!(
                "verify.max_n: {} gives systems beyond the dense guard {EIGEN_GUARD}",
                v.max_n
            )));
        }
        if v.symbol_points > 0 {
            if v.symbol_terms < fvtau::analysis::MIN_SYMBOL_TERMS {
                return Err(CliError::Config(format!(
                    "verify.symbol_terms: at least {} terms",
                    fvtau::analysis::MIN_SYMBOL_TERMS
                )));
            }
            if let Some(bad) = v.symbol_orders.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
                return Err(CliError::Config(format!("verify.symbol_orders: {bad} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn order_orders(&self) -> Result<Vec<f64>, CliError> {
        let d = self.example()?.dim();
        let o = self.order.orders.clone().unwrap_or_else(|| vec![0.5; d]);
        self.check_orders("order.orders", &o)?;
        Ok(o)
    }

    pub fn order_method(&self) -> Result<Method, CliError> {
        let symmetric = self.diffusivities()?.iter().all(|k| k.is_symmetric());
        match &self.order.method {
            Some(m) => m.parse().map_err(|e| CliError::Config(format!("order.method: {e}"))),
            None if symmetric => Ok(Method::PcgTau),
            None => Ok(Method::PgmresTau),
        }
    }

    pub fn validate_order(&self) -> Result<(), CliError> {
        self.order_orders()?;
        self.diffusivities()?;
        self.krylov.options()?;
        let method = self.order_method()?;
        if method.is_cg() && !self.diffusivities()?.iter().all(|k| k.is_symmetric()) {
            return Err(CliError::Config(format!(
                "order.method: {method} needs symmetric diffusivities"
            )));
        }
        let o = &self.order;
        if o.temporal_steps.is_empty() && o.spatial_grid.is_empty() {
            return Err(CliError::Config("order: both studies are empty".into()));
        }
        for (key, len) in [("order.temporal_steps", o.temporal_steps.len()), ("order.spatial_grid", o.spatial_grid.len())] {
            if len > 0 && len < 3 {
                return Err(CliError::Config(format!("{key}: need at least 3 refinement levels, got {len}")));
            }
        }
        if !o.temporal_steps.is_empty() {
            self.check_grid("order.temporal_grid", o.temporal_grid)?;
            if o.temporal_steps.contains(&0) {
                return Err(CliError::Config("order.temporal_steps: M must be positive".into()));
            }
        }
        for &g in &o.spatial_grid {
            self.check_grid("order.spatial_grid", g)?;
        }
        if o.steps_per_cell == 0 {
            return Err(CliError::Config("order.steps_per_cell: must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_table_config() {
        let c = ExperimentConfig::from_toml(
            r#"
            problem = "ex2"
            orders = [[0.1, 0.2, 0.3]]
            grid = [8]
            steps = [4]
            methods = ["cg", "pcg_tau"]
            "#,
        )
        .unwrap();
        c.validate_table().unwrap();
        assert_eq!(c.methods().unwrap(), vec![Method::Cg, Method::PcgTau]);
        assert_eq!(c.krylov.tol, 1e-9);
        assert!(c.diffusivities().unwrap().iter().all(|k| k.plus == 5.0));
    }

    #[test]
    fn explicit_diffusivities_and_bad_keys() {
        let c = ExperimentConfig::from_toml("diffusivities = [[1.0, 2.0], [3.0, 4.0]]").unwrap();
        assert_eq!(c.diffusivities().unwrap()[1].minus, 4.0);
        let err = ExperimentConfig::from_toml("method = [\"cg\"]").unwrap_err();
        assert!(err.to_string().contains("method"), "{err}");
        let err = ExperimentConfig::from_toml("grid = [8,\n  \"x\"]").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn semantic_errors_name_their_key() {
        let c = ExperimentConfig::from_toml("orders = [[0.1, 0.2]]\ngrid = [8]\nsteps = [4]").unwrap();
        assert!(c.validate_table().unwrap_err().to_string().contains("methods"));
        let c = ExperimentConfig::from_toml("orders = [[0.1]]\ngrid = [8]\nsteps = [4]\nmethods = [\"cg\"]").unwrap();
        assert!(c.validate_table().unwrap_err().to_string().contains("orders"));
        let c = ExperimentConfig::from_toml("orders = [[0.1, 0.2]]\ngrid = [512]\nsteps = [4]\nmethods = [\"cg\"]").unwrap();
        assert!(c.validate_table().unwrap_err().to_string().contains("cap"));
        let c = ExperimentConfig::from_toml("[verify]\nmax_n = 11").unwrap();
        assert!(c.validate_verify().is_err());
        let c = ExperimentConfig::from_toml("[order]\ntemporal_steps = [4, 8]").unwrap();
        assert!(c.validate_order().unwrap_err().to_string().contains("3 refinement levels"));
        let c = ExperimentConfig::from_toml("diffusivities = \"nonsymmetric\"\n[order]\nmethod = \"cg\"").unwrap();
        assert!(c.validate_order().is_err());
    }

    #[test]
    fn order_defaults_follow_symmetry() {
        let c = ExperimentConfig::from_toml("diffusivities = \"nonsymmetric\"").unwrap();
        assert_eq!(c.order_method().unwrap(), Method::PgmresTau);
        assert_eq!(c.order_orders().unwrap(), vec![0.5, 0.5]);
        c.validate_order().unwrap();
    }
}
