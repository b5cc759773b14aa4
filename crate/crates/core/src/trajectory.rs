//! Transition matrices derived from transport plans, and their compositions.
//!
//! `H^{t|s}` has entry `(k, j) = P(X_t = k | X_s = j)`, so columns index the
//! conditioning type and are probability vectors. A forward matrix
//! normalizes plan rows (`π_jk / (π1)_j`), a backward matrix normalizes plan
//! columns (`π_kj / (πᵀ1)_j`). Types with no conditioning mass get an all-zero
//! column that is flagged instead of rejected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::Marginal;
use crate::error::{Error, Result};
use crate::uot::TransportPlan;

/// Conditioning mass at or below this is treated as absent.
pub const ZERO_MASS: f64 = 1e-15;
const COMPOSE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `H^{t+1|t}`.
    Forward,
    /// `H^{t|t+1}`.
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
    direction: Direction,
    /// Time of the conditioning type.
    source_time: usize,
    target_time: usize,
    degenerate: Vec<usize>,
}

impl TransitionMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.entries[(k, j)]
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn source_time(&self) -> usize {
        self.source_time
    }

    pub fn target_time(&self) -> usize {
        self.target_time
    }

    /// Conditioning types with zero mass, whose columns are all zero.
    pub fn degenerate_columns(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(q))
            .iter()
            .copied()
            .collect()
    }
}

fn normalize_columns(
    joint: DMatrix<f64>,
    direction: Direction,
    source_time: usize,
    target_time: usize,
) -> TransitionMatrix {
    let d = joint.ncols();
    let mut entries = joint;
    let mut degenerate = Vec::new();
    for j in 0..d {
        let mass = entries.column(j).sum();
        if mass > ZERO_MASS {
            entries.column_mut(j).iter_mut().for_each(|v| *v /= mass);
        } else {
            entries.column_mut(j).fill(0.0);
            degenerate.push(j);
        }
    }
    TransitionMatrix {
        entries,
        direction,
        source_time,
        target_time,
        degenerate,
    }
}

/// `H^{t+1|t}` from the plan between times `t` and `t + 1`.
pub fn forward_transition(plan: &TransportPlan, t: usize) -> TransitionMatrix {
    normalize_columns(plan.entries().transpose(), Direction::Forward, t, t + 1)
}

/// `H^{t|t+1}` from the plan between times `t` and `t + 1`.
pub fn backward_transition(plan: &TransportPlan, t: usize) -> TransitionMatrix {
    normalize_columns(plan.entries().clone(), Direction::Backward, t + 1, t)
}

fn compose<'a>(
    steps: impl Iterator<Item = &'a TransitionMatrix>,
    q: &Marginal,
) -> Result<Marginal> {
    let mut v = q.probs().to_vec();
    for h in steps {
        if h.dim() != v.len() {
            return Err(Error::Composition(format!(
                "transition at time {} has dimension {}, expected {}",
                h.source_time,
                h.dim(),
                v.len()
            )));
        }
        v = h.apply(&v);
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > COMPOSE_TOLERANCE {
        return Err(Error::Degenerate(format!(
            "composed distribution has mass {total}; mass reached a type with no conditioning mass"
        )));
    }
    v.iter_mut().for_each(|x| *x = x.max(0.0) / total);
    Marginal::new(v)
}

fn check_chain(transitions: &[TransitionMatrix], direction: Direction) -> Result<()> {
    for h in transitions {
        if h.direction != direction {
            return Err(Error::Composition(format!(
                "expected {direction:?} transitions, got a {:?} matrix at time {}",
                h.direction, h.source_time
            )));
        }
    }
    for pair in transitions.windows(2) {
        let linked = match direction {
            Direction::Backward => pair[0].source_time == pair[1].target_time,
            Direction::Forward => pair[0].target_time == pair[1].source_time,
        };
        if !linked {
            return Err(Error::Composition(format!(
                "transition chain breaks between times {}→{} and {}→{}",
                pair[0].source_time, pair[0].target_time, pair[1].source_time, pair[1].target_time
            )));
        }
    }
    Ok(())
}

/// `Q_{s←τ} = H^{s|s+1} ⋯ H^{τ−1|τ} Q_τ`, with `transitions` ordered from
/// time `s` up to `τ − 1`.
pub fn ancestor_distribution(
    transitions: &[TransitionMatrix],
    q_tau: &Marginal,
) -> Result<Marginal> {
    check_chain(transitions, Direction::Backward)?;
    compose(transitions.iter().rev(), q_tau)
}

/// `Q_{τ→t} = H^{t|t−1} ⋯ H^{τ+1|τ} Q_τ`, with `transitions` ordered from
/// time `τ` up to `t − 1`.
pub fn descendant_distribution(
    transitions: &[TransitionMatrix],
    q_tau: &Marginal,
) -> Result<Marginal> {
    check_chain(transitions, Direction::Forward)?;
    compose(transitions.iter(), q_tau)
}

/// A type sequence `X_0, …, X_T` pinned at `X_τ = anchor_state`. States are
/// zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryPath {
    states: Vec<usize>,
    anchor_time: usize,
}

impl TrajectoryPath {
    pub fn new(states: Vec<usize>, anchor_time: usize, d: usize) -> Result<Self> {
        if anchor_time >= states.len() {
            return Err(Error::Input(format!(
                "anchor time {anchor_time} outside a path of length {}",
                states.len()
            )));
        }
        if let Some((t, s)) = states.iter().enumerate().find(|(_, &s)| s >= d) {
            return Err(Error::Input(format!(
                "path state {s} at time {t} is not a type index below {d}"
            )));
        }
        Ok(Self {
            states,
            anchor_time,
        })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn anchor_time(&self) -> usize {
        self.anchor_time
    }

    pub fn anchor_state(&self) -> usize {
        self.states[self.anchor_time]
    }
}

fn find(
    set: &[TransitionMatrix],
    direction: Direction,
    source_time: usize,
    target_time: usize,
) -> Result<&TransitionMatrix> {
    set.iter()
        .find(|h| {
            h.direction == direction && h.source_time == source_time && h.target_time == target_time
        })
        .ok_or_else(|| {
            Error::Composition(format!(
                "no {direction:?} transition from time {source_time} to {target_time}"
            ))
        })
}

/// Probability of `path` given its anchor: backward factors
/// `h^{t|t+1}[x_t, x_{t+1}]` for `t < τ` times forward factors
/// `h^{t+1|t}[x_{t+1}, x_t]` for `t ≥ τ`.
pub fn path_probability(
    path: &TrajectoryPath,
    backward: &[TransitionMatrix],
    forward: &[TransitionMatrix],
) -> Result<f64> {
    let x = &path.states;
    let mut p = 1.0;
    for t in (0..path.anchor_time).rev() {
        p *= find(backward, Direction::Backward, t + 1, t)?.get(x[t], x[t + 1]);
    }
    for t in path.anchor_time..x.len() - 1 {
        p *= find(forward, Direction::Forward, t, t + 1)?.get(x[t + 1], x[t]);
    }
    Ok(p)
}
