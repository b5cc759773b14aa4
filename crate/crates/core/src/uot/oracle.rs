//! Grid-search reference solver for small instances.
//!
//! The semi-relaxed objective splits as `min_p [W(p, b) + λ KL(p ‖ a)]`, where
//! `W(p, b)` is the balanced transport cost with row marginal `p`. `W` is
//! evaluated exactly through LP duality as the maximum of `⟨f, p⟩ + ⟨g, b⟩`
//! over the enumerated vertices of `{f_j + g_k ≤ m_jk}`, so the only
//! approximation is the grid over `p`. The objective is convex in `p`, so an
//! exhaustive grid is followed by zoomed grids around the incumbent.
//! Nothing here shares code with the scaling solver.

use nalgebra::DMatrix;

use crate::distributions::{kl_divergence, Marginal};
use crate::error::{Error, Result};

use super::{CostMatrix, TransportPlan};

pub const MAX_ORACLE_DIM: usize = 3;
const ZOOM_ROUNDS: usize = 4;
const ZOOM_RADIUS: f64 = 10.0;
const FEAS_TOL: f64 = 1e-12;

/// Exhaustive grid search for the semi-relaxed problem, `d ≤ 3` only.
pub fn oracle_solve(
    q_src: &Marginal,
    q_tgt: &Marginal,
    cost: &CostMatrix,
    lambda: f64,
    grid_step: f64,
) -> Result<TransportPlan> {
    let d = cost.dim();
    if d > MAX_ORACLE_DIM {
        return Err(Error::Unsupported(format!(
            "oracle_solve handles d ≤ {MAX_ORACLE_DIM}, got d = {d}"
        )));
    }
    if q_src.dim() != d || q_tgt.dim() != d {
        return Err(Error::Input("oracle dimension mismatch".into()));
    }
    if !(grid_step > 0.0 && grid_step < 1.0) || !(lambda > 0.0) {
        return Err(Error::Config(format!(
            "oracle needs 0 < grid_step < 1 and λ > 0, got {grid_step} and {lambda}"
        )));
    }

    let trees = spanning_trees(d);
    let b = q_tgt.probs();
    let duals: Vec<(Vec<f64>, f64)> = trees
        .iter()
        .filter_map(|t| dual_vertex(t, cost, d))
        .map(|(f, g)| {
            let gb = g.iter().zip(b).map(|(x, y)| x * y).sum();
            (f, gb)
        })
        .collect();
    let objective = |p: &[f64]| {
        let w = duals
            .iter()
            .map(|(f, gb)| gb + f.iter().zip(p).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        w + lambda * kl_divergence(p, q_src.probs())
    };

    let free = d - 1;
    let mut lo = vec![0.0; free];
    let mut hi = vec![1.0; free];
    let mut step = grid_step;
    let mut best = (f64::INFINITY, vec![0.0; d]);
    for _ in 0..=ZOOM_ROUNDS {
        scan(&lo, &hi, step, &mut |p| {
            let v = objective(p);
            if v < best.0 {
                best = (v, p.to_vec());
            }
        });
        for i in 0..free {
            lo[i] = (best.1[i] - ZOOM_RADIUS * step).max(0.0);
            hi[i] = (best.1[i] + ZOOM_RADIUS * step).min(1.0);
        }
        step /= 10.0;
    }

    let p = best.1;
    let entries = trees
        .iter()
        .filter_map(|t| primal_vertex(t, &p, b, d))
        .min_by(|x, y| {
            let cx = x.component_mul(cost.as_matrix()).sum();
            let cy = y.component_mul(cost.as_matrix()).sum();
            cx.total_cmp(&cy)
        })
        .ok_or_else(|| Error::Degenerate("no feasible basic plan at the oracle optimum".into()))?;
    TransportPlan::new(entries, q_src.clone(), q_tgt.clone())
}

/// Visits every simplex point on the grid inside the box `[lo, hi]` over the
/// first `d − 1` coordinates.
fn scan(lo: &[f64], hi: &[f64], step: f64, visit: &mut dyn FnMut(&[f64])) {
    let free = lo.len();
    let counts: Vec<usize> = (0..free)
        .map(|i| ((hi[i] - lo[i]) / step + 1e-9).floor() as usize + 1)
        .collect();
    let mut idx = vec![0usize; free];
    let mut p = vec![0.0; free + 1];
    loop {
        let mut used = 0.0;
        for i in 0..free {
            p[i] = (lo[i] + idx[i] as f64 * step).min(hi[i]);
            used += p[i];
        }
        if used <= 1.0 + 1e-12 {
            p[free] = (1.0 - used).max(0.0);
            visit(&p);
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == free {
                return;
            }
            idx[i] += 1;
            if idx[i] < counts[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// All sets of `2d − 1` cells forming a spanning tree of the bipartite graph
/// rows × columns.
fn spanning_trees(d: usize) -> Vec<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..d).map(move |k| (j, k))).collect();
    let size = 2 * d - 1;
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(size);
    fn rec(
        cells: &[(usize, usize)],
        start: usize,
        size: usize,
        d: usize,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if chosen.len() == size {
            if is_tree(chosen, d) {
                out.push(chosen.clone());
            }
            return;
        }
        for i in start..cells.len() {
            chosen.push(cells[i]);
            rec(cells, i + 1, size, d, chosen, out);
            chosen.pop();
        }
    }
    rec(&cells, 0, size, d, &mut chosen, &mut out);
    out
}

fn is_tree(edges: &[(usize, usize)], d: usize) -> bool {
    let mut parent: Vec<usize> = (0..2 * d).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for &(j, k) in edges {
        let (a, b) = (find(&mut parent, j), find(&mut parent, d + k));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Dual potentials with every tree cell tight and `f_0 = 0`, if feasible.
fn dual_vertex(
    tree: &[(usize, usize)],
    cost: &CostMatrix,
    d: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut f = vec![None; d];
    let mut g = vec![None; d];
    f[0] = Some(0.0);
    let mut changed = true;
    while changed {
        changed = false;
        for &(j, k) in tree {
            match (f[j], g[k]) {
                (Some(fj), None) => {
                    g[k] = Some(cost.get(j, k) - fj);
                    changed = true;
                }
                (None, Some(gk)) => {
                    f[j] = Some(cost.get(j, k) - gk);
                    changed = true;
                }
                _ => {}
            }
        }
    }
    let f: Vec<f64> = f.into_iter().collect::<Option<_>>()?;
    let g: Vec<f64> = g.into_iter().collect::<Option<_>>()?;
    for j in 0..d {
        for k in 0..d {
            if f[j] + g[k] > cost.get(j, k) + FEAS_TOL {
                return None;
            }
        }
    }
    Some((f, g))
}

/// The basic transport plan supported on `tree` with marginals `(p, b)`, if
/// non-negative.
fn primal_vertex(tree: &[(usize, usize)], p: &[f64], b: &[f64], d: usize) -> Option<DMatrix<f64>> {
    let mut supply: Vec<f64> = p.iter().chain(b).copied().collect();
    let mut remaining: Vec<(usize, usize)> = tree.to_vec();
    let mut plan = DMatrix::zeros(d, d);
    while !remaining.is_empty() {
        let mut degree = vec![0usize; 2 * d];
        for &(j, k) in &remaining {
            degree[j] += 1;
            degree[d + k] += 1;
        }
        let pos = remaining
            .iter()
            .position(|&(j, k)| degree[j] == 1 || degree[d + k] == 1)?;
        let (j, k) = remaining.swap_remove(pos);
        let flow = if degree[j] == 1 {
            supply[j]
        } else {
            supply[d + k]
        };
        plan[(j, k)] = flow;
        supply[j] -= flow;
        supply[d + k] -= flow;
    }
    if plan.iter().any(|&v| v < -1e-12) {
        return None;
    }
    Some(plan.map(|v| v.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: &[f64]) -> Marginal {
        Marginal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tree_counts() {
        // Spanning trees of K_{d,d}: d^{d−1} · d^{d−1}.
        assert_eq!(spanning_trees(2).len(), 4);
        assert_eq!(spanning_trees(3).len(), 81);
    }

    #[test]
    fn identical_marginals_give_diagonal() {
        let cost = CostMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let q = m(&[0.5, 0.5]);
        let plan = oracle_solve(&q, &q, &cost, 1.0, 1e-4).unwrap();
        assert!(plan.unbalanced_objective(&cost, 1.0) < 1e-12);
        assert!((plan.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_reference_value() {
        let cost = CostMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let plan = oracle_solve(&m(&[0.8, 0.2]), &m(&[0.3, 0.7]), &cost, 1.0, 1e-4).unwrap();
        let obj = plan.unbalanced_objective(&cost, 1.0);
        assert!((obj - 0.404_605_470_879_652_4).abs() < 1e-10, "{obj}");
        assert!((plan.row_sums()[0] - 0.595_390_324_808_310_3).abs() < 1e-6);
    }

    #[test]
    fn rejects_large_problems() {
        let cost = CostMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        let q = Marginal::uniform(4);
        assert!(matches!(
            oracle_solve(&q, &q, &cost, 1.0, 1e-2),
            Err(Error::Unsupported(_))
        ));
    }
}
