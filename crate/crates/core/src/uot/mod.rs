//! Discrete optimal transport between categorical marginals.
//!
//! Two problems are solved over plans `π` with the target (column) marginal
//! fixed exactly:
//!
//! * balanced: both marginals fixed, minimize `Σ m_jk π_jk`;
//! * semi-relaxed unbalanced: the row marginal is free but penalized,
//!   minimize `Σ m_jk π_jk + λ·KL(π1 ‖ q_src)`.
//!
//! Both are solved with entropic regularization `ε·Σ π(log π − 1)` by a
//! log-domain scaling iteration (see [`scaling`]). Reported objectives
//! exclude the entropic term.

mod scaling;

pub mod oracle;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::{kl_divergence, Marginal};
use crate::error::{Error, Result};

pub use oracle::oracle_solve;

/// Column-marginal tolerance every returned plan satisfies.
pub const COLUMN_TOLERANCE: f64 = 1e-8;

/// Pairwise transport costs `m_jk` between categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    /// Validates a square, non-negative, symmetric matrix with zero diagonal.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows == 0 {
            return Err(Error::Input(format!(
                "cost matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        for j in 0..rows {
            if entries[(j, j)] != 0.0 {
                return Err(Error::Input(format!(
                    "cost matrix diagonal entry ({j},{j}) is {}, expected 0",
                    entries[(j, j)]
                )));
            }
            for k in 0..cols {
                let v = entries[(j, k)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Input(format!(
                        "cost entry ({j},{k}) is {v}; costs must be finite and non-negative"
                    )));
                }
                let w = entries[(k, j)];
                if (v - w).abs() > 1e-12 * v.abs().max(w.abs()).max(1.0) {
                    return Err(Error::Input(format!(
                        "cost matrix is not symmetric at ({j},{k}): {v} vs {w}"
                    )));
                }
            }
        }
        Ok(Self(entries))
    }

    pub fn from_row_major(d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::Input(format!(
                "expected {} cost entries for d = {d}, got {}",
                d * d,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[(j, k)]
    }

    pub fn max_entry(&self) -> f64 {
        self.0.max()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Relabels categories: entry `(j, k)` of the result is `m[perm[j], perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.dim();
        Self(DMatrix::from_fn(d, d, |j, k| self.0[(perm[j], perm[k])]))
    }
}

/// A joint distribution over (source type, target type).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: DMatrix<f64>,
    source: Marginal,
    target: Marginal,
}

impl TransportPlan {
    /// Checks non-negativity and the column constraint against `target`.
    pub fn new(entries: DMatrix<f64>, source: Marginal, target: Marginal) -> Result<Self> {
        let d = source.dim();
        if target.dim() != d || entries.shape() != (d, d) {
            return Err(Error::Input(format!(
                "plan shape {:?} does not match marginals of size {} and {}",
                entries.shape(),
                d,
                target.dim()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Input(format!(
                "plan entry {v} is negative or non-finite"
            )));
        }
        let residual = column_residual(&entries, target.probs());
        if residual > COLUMN_TOLERANCE {
            return Err(Error::Input(format!(
                "plan column sums deviate from the target marginal by {residual:.3e}"
            )));
        }
        Ok(Self {
            entries,
            source,
            target,
        })
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[(j, k)]
    }

    /// The marginal the plan was solved against on the source side.
    pub fn source_marginal(&self) -> &Marginal {
        &self.source
    }

    pub fn target_marginal(&self) -> &Marginal {
        &self.target
    }

    /// `π1`, the realized source-side mass of each type.
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// `πᵀ1`.
    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.sum()
    }

    /// `Σ m_jk π_jk`.
    pub fn linear_cost(&self, cost: &CostMatrix) -> f64 {
        self.entries.component_mul(cost.as_matrix()).sum()
    }

    /// The unregularized semi-relaxed objective
    /// `Σ m_jk π_jk + λ·KL(π1 ‖ q_src)`.
    pub fn unbalanced_objective(&self, cost: &CostMatrix, lambda: f64) -> f64 {
        self.linear_cost(cost) + lambda * kl_divergence(&self.row_sums(), self.source.probs())
    }
}

fn column_residual(entries: &DMatrix<f64>, target: &[f64]) -> f64 {
    entries
        .column_iter()
        .zip(target)
        .map(|(c, t)| (c.sum() - t).abs())
        .fold(0.0, f64::max)
}

/// Entropic regularization strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Epsilon {
    Absolute(f64),
    /// A multiple of the largest cost entry, so the regularization does not
    /// depend on the units of the embedding.
    RelativeToMaxCost(f64),
}

impl Epsilon {
    /// The absolute ε for a given cost matrix. An all-zero cost matrix uses
    /// the scale factor itself.
    pub fn resolve(&self, cost: &CostMatrix) -> f64 {
        match *self {
            Epsilon::Absolute(eps) => eps,
            Epsilon::RelativeToMaxCost(scale) => {
                let max = cost.max_entry();
                if max > 0.0 {
                    scale * max
                } else {
                    scale
                }
            }
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Epsilon::Absolute(v) | Epsilon::RelativeToMaxCost(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the KL penalty on the source marginal.
    pub lambda: f64,
    pub epsilon: Epsilon,
    pub max_iters: usize,
    /// Sup-norm tolerance on successive log-scaling vectors.
    pub convergence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: Epsilon::RelativeToMaxCost(1e-3),
            max_iters: 10_000,
            convergence_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("epsilon", self.epsilon.value())?;
        positive("convergence tolerance", self.convergence_tol)?;
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_dims(q_src: &Marginal, q_tgt: &Marginal, cost: &CostMatrix) -> Result<()> {
    if q_src.dim() != q_tgt.dim() || q_src.dim() != cost.dim() {
        return Err(Error::Input(format!(
            "dimension mismatch: source {}, target {}, cost {}",
            q_src.dim(),
            q_tgt.dim(),
            cost.dim()
        )));
    }
    Ok(())
}

fn require_positive_source(q_src: &Marginal) -> Result<()> {
    if !q_src.is_strictly_positive() {
        return Err(Error::Precondition(
            "source marginal has zero entries; smooth it (e.g. Marginal::smooth) before solving"
                .into(),
        ));
    }
    Ok(())
}

/// Entropic balanced transport with both marginals fixed.
pub fn solve_balanced(
    q_src: &Marginal,
    q_tgt: &Marginal,
    cost: &CostMatrix,
    config: &SolverConfig,
) -> Result<TransportPlan> {
    config.validate()?;
    check_dims(q_src, q_tgt, cost)?;
    require_positive_source(q_src)?;
    if !q_tgt.is_strictly_positive() {
        return Err(Error::Precondition(
            "balanced transport needs a strictly positive target marginal; smooth it first".into(),
        ));
    }
    let eps = config.epsilon.resolve(cost);
    let entries = scaling::solve(q_src, q_tgt, cost, None, eps, config)?;
    TransportPlan::new(entries, q_src.clone(), q_tgt.clone())
}

/// Semi-relaxed unbalanced transport: exact column marginal `q_tgt`, KL
/// penalty of weight `λ` on the row marginal against `q_src`.
pub fn solve_unbalanced(
    q_src: &Marginal,
    q_tgt: &Marginal,
    cost: &CostMatrix,
    config: &SolverConfig,
) -> Result<TransportPlan> {
    config.validate()?;
    check_dims(q_src, q_tgt, cost)?;
    require_positive_source(q_src)?;
    let eps = config.epsilon.resolve(cost);
    let entries = scaling::solve(q_src, q_tgt, cost, Some(config.lambda), eps, config)?;
    TransportPlan::new(entries, q_src.clone(), q_tgt.clone())
}

/// The transport cost `W^λ(q_src, q_tgt)`: the unregularized objective at the
/// solved plan.
pub fn transport_cost(
    q_src: &Marginal,
    q_tgt: &Marginal,
    cost: &CostMatrix,
    config: &SolverConfig,
) -> Result<f64> {
    let plan = solve_unbalanced(q_src, q_tgt, cost, config)?;
    Ok(plan.unbalanced_objective(cost, config.lambda))
}
