//! File and label helpers shared by the runners.

use std::fs;
use std::path::{Path, PathBuf};

use fvtau::operators::Diffusivity;

use crate::CliError;

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// `(0.1, 0.2)`.
pub fn orders_label(orders: &[f64]) -> String {
    let parts: Vec<String> = orders.iter().map(f64::to_string).collect();
    format!("({})", parts.join(", "))
}

/// `(19,21) (21,23)`.
pub fn diffusivity_label(ks: &[Diffusivity<f64>]) -> String {
    ks.iter()
        .map(|k| format!("({},{})", k.plus, k.minus))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `4x5x6`.
pub fn shape_label(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn opt_exp(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}
