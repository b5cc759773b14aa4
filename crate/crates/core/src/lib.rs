//! Cell-type trajectory modelling with semi-relaxed unbalanced optimal
//! transport.
//!
//! Snapshots of categorical cell-type labels at successive time points are
//! linked by transport plans whose column marginal is the later snapshot and
//! whose row marginal is only softly tied (by a KL penalty) to the earlier
//! one, which lets the model absorb differential growth. The optimal cost of
//! each step, `W_t`, spikes where types convert into one another, and those
//! spikes are reported as change points.

// Index loops mirror the formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
pub mod distributions;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod reduce;
pub mod simulation;
pub mod trajectory;
pub mod uot;

pub use distributions::{GrowthProfile, Marginal, Snapshot};
pub use error::{Error, ErrorKind, Result};
pub use uot::{
    oracle_solve, solve_balanced, solve_unbalanced, transport_cost, CostMatrix, Epsilon,
    SolverConfig, TransportPlan,
};
