#![allow(dead_code)]

use celltype_ot::{Marginal, TransportPlan};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Flat Dirichlet via normalized exponentials.
pub fn dirichlet(rng: &mut ChaCha20Rng, d: usize) -> Marginal {
    let w: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().ln()).collect();
    Marginal::from_weights(&w).unwrap()
}

/// A strictly positive joint matrix with unit mass, wrapped as a plan whose
/// marginals are its own row and column sums.
pub fn random_plan(rng: &mut ChaCha20Rng, d: usize) -> TransportPlan {
    let raw: Vec<f64> = (0..d * d).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let m = DMatrix::from_row_slice(d, d, &raw.iter().map(|v| v / total).collect::<Vec<_>>());
    plan_from(m)
}

pub fn plan_from(m: DMatrix<f64>) -> TransportPlan {
    let rows: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = m.column_iter().map(|c| c.sum()).collect();
    TransportPlan::new(
        m,
        Marginal::from_weights(&rows).unwrap(),
        Marginal::from_weights(&cols).unwrap(),
    )
    .unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}
