//! The `W_t` statistic series and peak-based change-point detection.
//!
//! `W_t = W^λ(Q_t, Q_{t+1})` stays small when `Q_{t+1}` is explained by
//! growth alone (the relaxed row marginal absorbs it) and jumps when mass has
//! to move between types. Change points are strict local maxima that also
//! clear a robust `median + k·MAD` threshold.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Marginal;
use crate::error::{Error, Result};
use crate::uot::{solve_unbalanced, CostMatrix, SolverConfig, TransportPlan};

/// Consistency factor making the MAD estimate σ under normality.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSeries {
    pub values: Vec<f64>,
    pub lambda: f64,
    /// Time index of `values[0]`'s source marginal.
    pub time_offset: usize,
}

impl WSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Solves the plans `π^{t,t+1}` for every adjacent pair, in parallel.
///
/// With `smoothing = Some(δ)` each source marginal is smoothed first; the
/// target marginal is always used as is.
pub fn solve_pairs(
    marginals: &[Marginal],
    cost: &CostMatrix,
    config: &SolverConfig,
    smoothing: Option<f64>,
) -> Result<Vec<TransportPlan>> {
    if marginals.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 2 time points, got {}",
            marginals.len()
        )));
    }
    config.validate()?;
    (0..marginals.len() - 1)
        .into_par_iter()
        .map(|t| {
            let src = match smoothing {
                Some(delta) => marginals[t].smooth(delta)?,
                None => marginals[t].clone(),
            };
            solve_unbalanced(&src, &marginals[t + 1], cost, config)
                .map_err(|e| Error::at_time(t, e))
        })
        .collect()
}

/// `W_t` for each pair of adjacent marginals.
pub fn compute_w_series(
    marginals: &[Marginal],
    cost: &CostMatrix,
    config: &SolverConfig,
    smoothing: Option<f64>,
) -> Result<WSeries> {
    let plans = solve_pairs(marginals, cost, config, smoothing)?;
    Ok(w_series_from_plans(&plans, cost, config.lambda))
}

pub fn w_series_from_plans(plans: &[TransportPlan], cost: &CostMatrix, lambda: f64) -> WSeries {
    WSeries {
        values: plans
            .iter()
            .map(|p| p.unbalanced_objective(cost, lambda))
            .collect(),
        lambda,
        time_offset: 0,
    }
}

/// Scale on which the detection threshold is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeakScale {
    /// Threshold on `W` itself.
    Linear,
    /// Threshold on `√W`, which tames the right-skewed sampling noise of `W`.
    #[default]
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetector {
    pub window: usize,
    pub threshold_k: f64,
    pub scale: PeakScale,
}

impl Default for PeakDetector {
    fn default() -> Self {
        Self {
            window: 2,
            threshold_k: 3.0,
            scale: PeakScale::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    /// Strictly increasing indices into the series.
    pub detected: Vec<usize>,
    /// Threshold on the detector's scale; `None` when detection was skipped.
    pub threshold_used: Option<f64>,
    pub window_used: usize,
    pub scale: PeakScale,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

impl PeakDetector {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("peak window must be at least 1".into()));
        }
        if !(self.threshold_k > 0.0 && self.threshold_k.is_finite()) {
            return Err(Error::Config(format!(
                "threshold_k must be positive, got {}",
                self.threshold_k
            )));
        }
        Ok(())
    }

    pub fn detect(&self, series: &WSeries) -> Result<ChangePointReport> {
        self.detect_values(&series.values)
    }

    pub fn detect_values(&self, values: &[f64]) -> Result<ChangePointReport> {
        self.validate()?;
        if values.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "peak detection needs at least 3 values, got {}",
                values.len()
            )));
        }
        let x: Vec<f64> = match self.scale {
            PeakScale::Linear => values.to_vec(),
            PeakScale::Sqrt => values.iter().map(|v| v.max(0.0).sqrt()).collect(),
        };
        let s = sorted(x.iter().copied());
        let med = median(&s);
        let mad = MAD_SCALE * median(&sorted(x.iter().map(|v| (v - med).abs())));
        let threshold = med + self.threshold_k * mad;

        let detected = (0..x.len())
            .filter(|&t| {
                let lo = t.saturating_sub(self.window);
                let hi = (t + self.window).min(x.len() - 1);
                x[t] > threshold && (lo..=hi).all(|u| u == t || x[u] < x[t])
            })
            .collect();
        Ok(ChangePointReport {
            detected,
            threshold_used: Some(threshold),
            window_used: self.window,
            scale: self.scale,
        })
    }
}

/// Detection with the given window and threshold on the linear scale.
pub fn detect_peaks(
    series: &WSeries,
    window: usize,
    threshold_k: f64,
) -> Result<ChangePointReport> {
    PeakDetector {
        window,
        threshold_k,
        scale: PeakScale::Linear,
    }
    .detect(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Exact-index set scoring. An empty detected set has precision 0.
pub fn score_detection(truth: &[usize], detected: &[usize]) -> Result<DetectionMetrics> {
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    let detected: BTreeSet<usize> = detected.iter().copied().collect();
    if truth.is_empty() {
        return Err(Error::Input(
            "scoring needs a non-empty set of true change points".into(),
        ));
    }
    let hits = truth.intersection(&detected).count() as f64;
    let precision = if detected.is_empty() {
        0.0
    } else {
        hits / detected.len() as f64
    };
    let recall = hits / truth.len() as f64;
    let f_score = if precision > 0.0 && recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DetectionMetrics {
        precision,
        recall,
        f_score,
    })
}
