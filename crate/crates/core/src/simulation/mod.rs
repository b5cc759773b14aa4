//! Synthetic benchmark: growth-driven marginal dynamics with injected type
//! conversions, per-cell expression sampling, and Monte Carlo evaluation.
//!
//! Randomness uses ChaCha20 seeded from `seed`, with stream = run index and
//! the word position set to `time · 2³⁶`. Each `(run, time)` block draws its
//! `n` labels and then the `n × G` expression matrix row by row, so runs and
//! time points can be generated in any order or in parallel.

mod bench;

pub use bench::{run_benchmark, run_once, BenchConfig, BenchReport, RunResult, Summary};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{GrowthProfile, Marginal, Snapshot};
use crate::error::{Error, Result};
use crate::reduce::{FeatureSummary, Reducer};
use crate::uot::{CostMatrix, SolverConfig, TransportPlan};

/// Words of keystream reserved per `(run, time)` block.
const BLOCK_WORDS_LOG2: u32 = 36;

/// How `exp(ν sin((t+j−1)/d) π)` is grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GrowthReading {
    /// `exp(ν · sin(π (t+j−1)/d))`: period `2d` in `t`.
    #[default]
    PiInside,
    /// `exp(ν · π · sin((t+j−1)/d))`.
    PiOutside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    /// Horizon: marginals `Q_0..Q_T`.
    pub t: usize,
    /// Genes per cell.
    pub g: usize,
    /// Cells per time point.
    pub n: usize,
    pub nu: f64,
    pub eta: f64,
    /// A change at `t` means `Q_{t+1}` deviates from `g_t(Q_t)`.
    pub change_times: Vec<usize>,
    pub seed: u64,
    pub growth: GrowthReading,
    pub reducer: Reducer,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            d: 10,
            t: 50,
            g: 50,
            n: 2000,
            nu: 0.1,
            eta: 1.0,
            change_times: vec![10, 20, 30, 40],
            seed: 0,
            growth: GrowthReading::default(),
            reducer: Reducer::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.d < 2 || self.t < 2 || self.g < 1 || self.n < 1 {
            return cfg(format!(
                "need d ≥ 2, T ≥ 2, G ≥ 1, n ≥ 1 (got d={}, T={}, G={}, n={})",
                self.d, self.t, self.g, self.n
            ));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite() && self.eta >= 0.0 && self.eta.is_finite()) {
            return cfg(format!(
                "ν and η must be non-negative (got {}, {})",
                self.nu, self.eta
            ));
        }
        if let Some(&c) = self.change_times.iter().find(|&&c| c >= self.t) {
            return cfg(format!("change time {c} outside [0, {}]", self.t - 1));
        }
        if !self.change_times.is_empty() && self.d % 2 == 1 {
            return cfg(format!(
                "the change vectors split types into two halves; d = {} is odd",
                self.d
            ));
        }
        Ok(())
    }

    fn sorted_changes(&self) -> Vec<usize> {
        let mut c = self.change_times.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Mean expression level of type `j` (1-based): `0.5(j − d) − 1`.
    pub fn mean_level(&self, j: usize) -> f64 {
        0.5 * (j as f64 - self.d as f64) - 1.0
    }

    /// `m_jk = ‖μ_j − μ_k‖² = G · 0.25 (j − k)²`; the type means are
    /// collinear, so any linear reduction keeping their axis gives the same.
    pub fn true_cost(&self) -> CostMatrix {
        let d = self.d;
        let g = self.g as f64;
        CostMatrix::new(DMatrix::from_fn(d, d, |j, k| {
            let diff = j as f64 - k as f64;
            g * 0.25 * diff * diff
        }))
        .expect("analytic cost is valid")
    }
}

/// `g_{t,j}` with `j` 1-based.
pub fn growth_rate(t: usize, j: usize, config: &SimConfig) -> f64 {
    let x = (t + j - 1) as f64 / config.d as f64;
    match config.growth {
        GrowthReading::PiInside => (config.nu * (PI * x).sin()).exp(),
        GrowthReading::PiOutside => (config.nu * PI * x.sin()).exp(),
    }
}

pub fn growth_profile(t: usize, config: &SimConfig) -> GrowthProfile {
    GrowthProfile::new((1..=config.d).map(|j| growth_rate(t, j, config)).collect())
        .expect("growth rates are positive")
}

/// `Q_0..Q_T`: uniform start, growth each step, and at the `k`-th change
/// (in time order) a factor `exp(±η)` on the first/second half of the types,
/// with the sign alternating between changes.
pub fn generate_marginals(config: &SimConfig) -> Result<Vec<Marginal>> {
    config.validate()?;
    let changes = config.sorted_changes();
    let half = config.d / 2;
    let mut out = Vec::with_capacity(config.t + 1);
    out.push(Marginal::uniform(config.d));
    for t in 0..config.t {
        let grown = out[t].apply_growth(&growth_profile(t, config))?;
        let next = match changes.binary_search(&t) {
            Ok(k) => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let w: Vec<f64> = grown
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(j, q)| {
                        let s = if j < half { sign } else { -sign };
                        q * (config.eta * s).exp()
                    })
                    .collect();
                Marginal::from_weights(&w)?
            }
            Err(_) => grown,
        };
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub marginals: Vec<Marginal>,
    pub plans: Vec<TransportPlan>,
    pub cost: CostMatrix,
    pub change_times: Vec<usize>,
}

/// Marginals plus the population plans under the analytic cost.
pub fn generate_truth(config: &SimConfig, solver: &SolverConfig) -> Result<SimTruth> {
    let marginals = generate_marginals(config)?;
    let cost = config.true_cost();
    let plans = crate::changepoint::solve_pairs(&marginals, &cost, solver, None)?;
    Ok(SimTruth {
        marginals,
        plans,
        cost,
        change_times: config.sorted_changes(),
    })
}

/// The generator for one `(run, time)` block.
pub fn block_rng(seed: u64, run: u64, time: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng.set_word_pos((time as u128) << BLOCK_WORDS_LOG2);
    rng
}

/// `n` i.i.d. zero-based labels from `q`.
pub fn sample_labels(q: &Marginal, n: usize, rng: &mut ChaCha20Rng) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(q.probs())
        .map_err(|e| Error::Degenerate(format!("cannot sample from marginal: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Row `i` is `μ_{x_i} + z` with `z ~ N(0, I_G)`.
pub fn sample_expressions(
    labels: &Snapshot,
    config: &SimConfig,
    rng: &mut ChaCha20Rng,
) -> DMatrix<f64> {
    expressions_for(&labels.labels, config, rng)
}

fn expressions_for(labels: &[usize], config: &SimConfig, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let g = config.g;
    let mut data = Vec::with_capacity(labels.len() * g);
    for &x in labels {
        let mu = config.mean_level(x + 1);
        data.extend((0..g).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mu + z
        }));
    }
    DMatrix::from_row_slice(labels.len(), g, &data)
}

/// One simulated snapshot: labels and expressions of time `time` in run `run`.
pub fn sample_block(
    q: &Marginal,
    config: &SimConfig,
    run: u64,
    time: usize,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let mut rng = block_rng(config.seed, run, time);
    let labels = sample_labels(q, config.n, &mut rng)?;
    let expr = expressions_for(&labels, config, &mut rng);
    Ok((labels, expr))
}

pub fn type_name(j: usize) -> String {
    format!("type{}", j + 1)
}

/// Centroid cost from sampled cells under the configured reducer.
pub fn build_sim_cost(summary: &FeatureSummary, config: &SimConfig) -> Result<CostMatrix> {
    summary.cost(config.reducer, &type_name)
}
