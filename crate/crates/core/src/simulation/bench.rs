use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{
    score_detection, solve_pairs, w_series_from_plans, DetectionMetrics, PeakDetector,
};
use crate::distributions::{Snapshot, DEFAULT_SMOOTHING};
use crate::error::{Error, Result};
use crate::reduce::FeatureSummary;
use crate::uot::SolverConfig;

use super::{build_sim_cost, generate_truth, sample_block, SimConfig, SimTruth};

pub const BENCH_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sim: SimConfig,
    pub solver: SolverConfig,
    /// Smoothing applied to each estimated source marginal.
    pub smoothing: f64,
    pub detector: PeakDetector,
    pub runs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            solver: SolverConfig::default(),
            smoothing: DEFAULT_SMOOTHING,
            detector: PeakDetector::default(),
            runs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub w: Vec<f64>,
    pub detected: Vec<usize>,
    /// `None` when there are no true change points.
    pub metrics: Option<DetectionMetrics>,
    /// Mean `‖π̂ − π‖²_F` over change times (`None` if there are none).
    pub error_change: Option<f64>,
    /// Mean `‖π̂ − π‖²_F` over the other times.
    pub error_non_change: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single run.
    pub std_error: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std_error })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u64,
    pub config: BenchConfig,
    pub runs: usize,
    /// Standard errors are zero because only one run was made.
    pub single_run: bool,
    pub error_change: Option<Summary>,
    pub error_non_change: Option<Summary>,
    pub precision: Option<Summary>,
    pub recall: Option<Summary>,
    pub f_score: Option<Summary>,
    /// Fraction of runs with no detected change point.
    pub zero_detection_fraction: f64,
    pub per_run: Vec<RunResult>,
}

/// One Monte Carlo replicate against a precomputed truth.
pub fn run_once(config: &BenchConfig, truth: &SimTruth, run: usize) -> Result<RunResult> {
    let sim = &config.sim;
    let mut summary = FeatureSummary::new(sim.d, sim.g);
    let mut marginals = Vec::with_capacity(sim.t + 1);
    for (time, q) in truth.marginals.iter().enumerate() {
        let (labels, expr) = sample_block(q, sim, run as u64, time)?;
        summary.add_block(&labels, &expr);
        marginals.push(Snapshot::new(time, labels)?.empirical_marginal(sim.d)?);
    }
    let cost = build_sim_cost(&summary, sim)?;
    let plans = solve_pairs(&marginals, &cost, &config.solver, Some(config.smoothing))?;
    let w = w_series_from_plans(&plans, &cost, config.solver.lambda);
    let detected = config.detector.detect(&w)?.detected;
    let metrics = if truth.change_times.is_empty() {
        None
    } else {
        Some(score_detection(&truth.change_times, &detected)?)
    };

    let (mut change, mut other) = (Vec::new(), Vec::new());
    for (t, (est, tru)) in plans.iter().zip(&truth.plans).enumerate() {
        let err = (est.entries() - tru.entries()).norm_squared();
        if truth.change_times.contains(&t) {
            change.push(err);
        } else {
            other.push(err);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(RunResult {
        run,
        w: w.values,
        detected,
        metrics,
        error_change: mean(&change),
        error_non_change: mean(&other),
    })
}

/// Runs `config.runs` replicates in parallel; output order and content do not
/// depend on the thread count.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    if config.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    config.detector.validate()?;
    if !(config.smoothing > 0.0) {
        return Err(Error::Config(format!(
            "smoothing must be positive, got {}",
            config.smoothing
        )));
    }
    let truth = generate_truth(&config.sim, &config.solver)?;
    let per_run: Vec<RunResult> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_once(config, &truth, r))
        .collect::<Result<_>>()?;

    let collect = |f: &dyn Fn(&RunResult) -> Option<f64>| -> Option<Summary> {
        Summary::of(&per_run.iter().filter_map(f).collect::<Vec<_>>())
    };
    let zero = per_run.iter().filter(|r| r.detected.is_empty()).count();
    Ok(BenchReport {
        schema_version: BENCH_SCHEMA_VERSION,
        config: config.clone(),
        runs: config.runs,
        single_run: config.runs == 1,
        error_change: collect(&|r| r.error_change),
        error_non_change: collect(&|r| r.error_non_change),
        precision: collect(&|r| r.metrics.map(|m| m.precision)),
        recall: collect(&|r| r.metrics.map(|m| m.recall)),
        f_score: collect(&|r| r.metrics.map(|m| m.f_score)),
        zero_detection_fraction: zero as f64 / config.runs as f64,
        per_run,
    })
}
