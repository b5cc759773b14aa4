//! Categorical marginals over a fixed set of `d` cell types.
//!
//! Category indices are zero-based throughout the crate: category `k` here is
//! type `k + 1` in one-based notation. The ordering is fixed by the label
//! dictionary at ingestion so matrices from different time points compose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ q_k − 1|` accepted by [`Marginal::new`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default additive smoothing applied to source marginals before solving.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// A probability vector over `d` categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Marginal(Vec<f64>);

impl Marginal {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input(
                "marginal must have at least one category".into(),
            ));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Input(format!(
                "marginal entry {k} is {p}; entries must be finite and non-negative"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Input(format!(
                "marginal sums to {total}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights to unit mass.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("weights have zero total mass".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// The uniform marginal over `d` categories.
    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|p| *p > 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Additive smoothing: entry `k` becomes `(q_k + delta) / (1 + d·delta)`.
    pub fn smooth(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing delta must be positive, got {delta}"
            )));
        }
        let denom = 1.0 + self.dim() as f64 * delta;
        Ok(Self(self.0.iter().map(|q| (q + delta) / denom).collect()))
    }

    /// Growth map: reweights each category by its rate and renormalizes.
    pub fn apply_growth(&self, growth: &GrowthProfile) -> Result<Self> {
        if growth.dim() != self.dim() {
            return Err(Error::Input(format!(
                "growth profile has {} rates but the marginal has {} categories",
                growth.dim(),
                self.dim()
            )));
        }
        // Uniform growth is the identity; returning early keeps it bit-exact.
        let first = growth.rates[0];
        if growth.rates.iter().all(|g| *g == first) {
            return Ok(self.clone());
        }
        let weighted: Vec<f64> = self
            .0
            .iter()
            .zip(&growth.rates)
            .map(|(q, g)| q * g)
            .collect();
        let total: f64 = weighted.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Degenerate(
                "growth-weighted marginal has zero total mass".into(),
            ));
        }
        Ok(Self(weighted.into_iter().map(|w| w / total).collect()))
    }
}

impl TryFrom<Vec<f64>> for Marginal {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Marginal> for Vec<f64> {
    fn from(value: Marginal) -> Self {
        value.0
    }
}

/// The observed cell types at one time point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub time_index: usize,
    /// Zero-based category index of each sampled cell.
    pub labels: Vec<usize>,
}

impl Snapshot {
    pub fn new(time_index: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Input(format!(
                "snapshot at time {time_index} has no cells"
            )));
        }
        Ok(Self { time_index, labels })
    }

    /// Empirical distribution of the labels over `d` categories.
    pub fn empirical_marginal(&self, d: usize) -> Result<Marginal> {
        let mut counts = vec![0u64; d];
        for (i, &label) in self.labels.iter().enumerate() {
            match counts.get_mut(label) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::Input(format!(
                        "time {}: cell {i} has category index {label}, outside 0..{d}",
                        self.time_index
                    )))
                }
            }
        }
        let n = self.labels.len() as f64;
        Marginal::new(counts.into_iter().map(|c| c as f64 / n).collect())
    }
}

/// Per-category multiplicative growth over one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
    rates: Vec<f64>,
}

impl GrowthProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Input("growth profile is empty".into()));
        }
        if let Some((j, g)) = rates
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::Input(format!(
                "growth rate {j} is {g}; rates must be positive"
            )));
        }
        Ok(Self { rates })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            rates: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

/// `Σ p_k log(p_k / q_k)` with `0·log 0 = 0`; infinite when `p` puts mass
/// where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pk, &qk)| {
            if pk <= 0.0 {
                0.0
            } else if qk <= 0.0 {
                f64::INFINITY
            } else {
                pk * (pk / qk).ln()
            }
        })
        .sum()
}
