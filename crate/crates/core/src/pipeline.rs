//! End-to-end analysis of a cell table: marginals, centroid costs, plans,
//! the `W_t` series, change points and transition matrices.

use crate::changepoint::{solve_pairs, w_series_from_plans};
use crate::error::{Error, Result};
use crate::io::dataset::Dataset;
use crate::io::report::{
    AnalysisConfig, AnalysisReport, MatrixRecord, PairRecord, REPORT_SCHEMA_VERSION,
};
use crate::trajectory::{backward_transition, forward_transition};
use crate::uot::TransportPlan;

/// The report together with the solved plans (for rendering).
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub plans: Vec<TransportPlan>,
}

pub fn analyze(dataset: &Dataset, config: &AnalysisConfig) -> Result<Analysis> {
    if dataset.n_times() < 2 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 2 time points, got {}",
            dataset.n_times()
        )));
    }
    if !(config.smoothing > 0.0 && config.smoothing.is_finite()) {
        return Err(Error::Config(format!(
            "smoothing delta must be positive, got {}",
            config.smoothing
        )));
    }
    config.solver.validate()?;
    config.detector.validate()?;

    let marginals = dataset.marginals()?;
    let cost = dataset.cost(config.reducer)?;
    let plans = solve_pairs(&marginals, &cost, &config.solver, Some(config.smoothing))?;
    let w = w_series_from_plans(&plans, &cost, config.solver.lambda);
    let change_points = if w.len() >= 3 {
        config.detector.detect(&w)?
    } else {
        log::warn!("only {} transition(s): peak detection skipped", w.len());
        crate::changepoint::ChangePointReport {
            detected: Vec::new(),
            threshold_used: None,
            window_used: config.detector.window,
            scale: config.detector.scale,
        }
    };

    let pairs = plans
        .iter()
        .zip(&w.values)
        .enumerate()
        .map(|(t, (plan, &w))| {
            let fwd = forward_transition(plan, t);
            let bwd = backward_transition(plan, t);
            PairRecord {
                t,
                plan: MatrixRecord::from(plan.entries()),
                w,
                forward: MatrixRecord::from(fwd.entries()),
                backward: MatrixRecord::from(bwd.entries()),
                forward_degenerate: fwd.degenerate_columns().to_vec(),
                backward_degenerate: bwd.degenerate_columns().to_vec(),
            }
        })
        .collect();

    let report = AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        labels: dataset.labels.clone(),
        times: dataset.times.clone(),
        marginals: marginals.into_iter().map(|m| m.into_inner()).collect(),
        cost: MatrixRecord::from(cost.as_matrix()),
        pairs,
        change_points,
        config: config.clone(),
    };
    Ok(Analysis { report, plans })
}
