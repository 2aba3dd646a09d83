#![allow(dead_code)]

use fvtau::coeffs::FractionalOrder;
use fvtau::operators::{CnFvOperator, Diffusivity, GridSpec};
use rand::Rng;

pub fn ord(d: f64) -> FractionalOrder<f64> {
    FractionalOrder::new(d).unwrap()
}

pub fn operator(n: &[usize], orders: &[f64], k: &[(f64, f64)], dt: f64) -> CnFvOperator<f64> {
    let grid = GridSpec::unit(n).unwrap();
    let orders: Vec<_> = orders.iter().map(|&d| ord(d)).collect();
    let ks: Vec<_> = k.iter().map(|&(p, m)| Diffusivity::new(p, m).unwrap()).collect();
    CnFvOperator::new(grid, &orders, &ks, dt).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||a - b|| / ||b||`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// Random operator with per-axis sizes in `1..=max_n`.
pub struct Draw {
    pub shape: Vec<usize>,
    pub orders: Vec<f64>,
    pub k: Vec<(f64, f64)>,
    pub dt: f64,
}

impl Draw {
    pub fn sample(rng: &mut impl Rng, max_n: usize, symmetric: bool) -> Self {
        let d = if rng.gen_bool(0.5) { 2 } else { 3 };
        let shape = (0..d).map(|_| rng.gen_range(2..=max_n)).collect();
        let orders = (0..d).map(|_| rng.gen_range(0.05..0.95)).collect();
        let k = (0..d)
            .map(|_| {
                let p = rng.gen_range(0.1..30.0);
                if symmetric { (p, p) } else { (p, rng.gen_range(0.1..30.0)) }
            })
            .collect();
        let dt = 10f64.powf(rng.gen_range(-3.0..0.0));
        Self { shape, orders, k, dt }
    }

    pub fn operator(&self) -> CnFvOperator<f64> {
        operator(&self.shape, &self.orders, &self.k, self.dt)
    }
}
