//! Log-domain generalized scaling with a Newton polish.
//!
//! With potentials `f = log u`, `g = log v` the scaling updates read
//!
//! ```text
//! f_j = ρ (log a_j − lse_k(g_k − m_jk/ε))      ρ = λ/(λ+ε), or 1 when balanced
//! g_k = log b_k − lse_j(f_j − m_jk/ε)
//! π_jk = exp(f_j + g_k − m_jk/ε)
//! ```
//!
//! The gauge `(f + c, g − c)` leaves `π` unchanged, so convergence is measured
//! on `(f − f_0, g + f_0)`. When supports nearly decouple the iteration
//! contracts at rate `ρ` only, so after [`WARMUP_SWEEPS`] the solver switches
//! to damped Newton ascent on the semi-dual in `φ = ε f` (the column
//! potential eliminated in closed form). Both phases share the fixed point,
//! and the final column update makes the target marginal exact.

use nalgebra::{DMatrix, DVector};

use crate::distributions::Marginal;
use crate::error::{Error, Result};

use super::{CostMatrix, SolverConfig};

const WARMUP_SWEEPS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// A stalled line search is accepted when the optimality residual is this small.
const STALL_RESIDUAL: f64 = 1e-9;

fn lse(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct Problem {
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    log_a: Vec<f64>,
    /// `−inf` on empty target columns.
    log_b: Vec<f64>,
    /// `m / ε`, row-major.
    m_eps: Vec<f64>,
    eps: f64,
    lambda: Option<f64>,
    /// Largest cost entry (1 when all costs vanish); sets the ridge units.
    cost_scale: f64,
}

impl Problem {
    fn me(&self, j: usize, k: usize) -> f64 {
        self.m_eps[j * self.d + k]
    }

    fn active(&self, k: usize) -> bool {
        self.b[k] > 0.0
    }

    fn update_g(&self, f: &[f64], g: &mut [f64]) {
        for k in 0..self.d {
            g[k] = if self.active(k) {
                self.log_b[k] - lse((0..self.d).map(|j| f[j] - self.me(j, k)))
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    fn update_f(&self, g: &[f64], f: &mut [f64], rho: f64) {
        for j in 0..self.d {
            f[j] = rho * (self.log_a[j] - lse((0..self.d).map(|k| g[k] - self.me(j, k))));
        }
    }

    fn plan(&self, f: &[f64], g: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |j, k| {
            if self.active(k) {
                (f[j] + g[k] - self.me(j, k)).exp()
            } else {
                0.0
            }
        })
    }

    /// Row weights the optimal row sums must match: `a e^{−φ/λ}`, or `a`.
    fn row_target(&self, phi: &[f64]) -> Vec<f64> {
        match self.lambda {
            Some(l) => self
                .a
                .iter()
                .zip(phi)
                .map(|(a, p)| a * (-p / l).exp())
                .collect(),
            None => self.a.clone(),
        }
    }

    fn residual(&self, f: &[f64], g: &[f64]) -> f64 {
        let phi: Vec<f64> = f.iter().map(|x| x * self.eps).collect();
        let plan = self.plan(f, g);
        self.row_target(&phi)
            .iter()
            .enumerate()
            .map(|(j, w)| (plan.row(j).sum() - w).abs())
            .fold(0.0, f64::max)
    }

    /// Semi-dual value and the induced plan (columns exact by construction).
    fn semidual(&self, phi: &[f64]) -> (f64, DMatrix<f64>) {
        let d = self.d;
        let mut plan = DMatrix::zeros(d, d);
        let mut value = match self.lambda {
            Some(l) => {
                -l * self
                    .a
                    .iter()
                    .zip(phi)
                    .map(|(a, p)| a * (-p / l).exp_m1())
                    .sum::<f64>()
            }
            None => self.a.iter().zip(phi).map(|(a, p)| a * p).sum(),
        };
        let mut col = vec![0.0; d];
        for k in (0..d).filter(|&k| self.active(k)) {
            for (j, c) in col.iter_mut().enumerate() {
                *c = phi[j] / self.eps - self.me(j, k);
            }
            let l = lse(col.iter().copied());
            value += self.b[k] * self.eps * (self.log_b[k] - l);
            for j in 0..d {
                plan[(j, k)] = self.b[k] * (col[j] - l).exp();
            }
        }
        (value, plan)
    }
}

enum Outcome {
    Converged,
    Exhausted,
}

pub(super) fn solve(
    q_src: &Marginal,
    q_tgt: &Marginal,
    cost: &CostMatrix,
    lambda: Option<f64>,
    eps: f64,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let d = q_src.dim();
    let b = q_tgt.probs().to_vec();
    let problem = Problem {
        d,
        a: q_src.probs().to_vec(),
        log_a: q_src.probs().iter().map(|x| x.ln()).collect(),
        log_b: b
            .iter()
            .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
            .collect(),
        b,
        m_eps: (0..d * d).map(|i| cost.get(i / d, i % d) / eps).collect(),
        eps,
        lambda,
        cost_scale: if cost.max_entry() > 0.0 {
            cost.max_entry()
        } else {
            1.0
        },
    };
    let rho = lambda.map_or(1.0, |l| l / (l + eps));
    let tol = config.convergence_tol;

    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    problem.update_g(&f, &mut g);
    let (mut f_old, mut g_old) = (f.clone(), g.clone());

    let warmup = WARMUP_SWEEPS.min(config.max_iters);
    for it in 1..=warmup {
        f_old.copy_from_slice(&f);
        g_old.copy_from_slice(&g);
        problem.update_f(&g, &mut f, rho);
        problem.update_g(&f, &mut g);
        if gauge_change(&f, &g, &f_old, &g_old) < tol {
            log::trace!("scaling converged after {it} sweeps");
            return Ok(problem.plan(&f, &g));
        }
    }
    if warmup == config.max_iters {
        return Err(Error::Convergence {
            iterations: config.max_iters,
            residual: problem.residual(&f, &g),
        });
    }

    let mut phi: Vec<f64> = f.iter().map(|x| x * eps).collect();
    let budget = config.max_iters - warmup;
    match newton(&problem, &mut phi, budget, tol) {
        Outcome::Converged => {
            let f: Vec<f64> = phi.iter().map(|p| p / eps).collect();
            problem.update_g(&f, &mut g);
            Ok(problem.plan(&f, &g))
        }
        Outcome::Exhausted => {
            let f: Vec<f64> = phi.iter().map(|p| p / eps).collect();
            problem.update_g(&f, &mut g);
            Err(Error::Convergence {
                iterations: config.max_iters,
                residual: problem.residual(&f, &g),
            })
        }
    }
}

fn gauge_change(f: &[f64], g: &[f64], f_old: &[f64], g_old: &[f64]) -> f64 {
    let (s, s_old) = (f[0], f_old[0]);
    let df = f
        .iter()
        .zip(f_old)
        .map(|(x, y)| ((x - s) - (y - s_old)).abs());
    let dg = g
        .iter()
        .zip(g_old)
        .filter(|(x, _)| x.is_finite())
        .map(|(x, y)| ((x + s) - (y + s_old)).abs());
    df.chain(dg).fold(0.0, f64::max)
}

fn newton(problem: &Problem, phi: &mut [f64], budget: usize, tol: f64) -> Outcome {
    let d = problem.d;
    // Balanced duals are only defined up to a constant: pin φ_0.
    let free0 = usize::from(problem.lambda.is_none());
    let n = d - free0;
    if n == 0 {
        return Outcome::Converged;
    }
    let mut trial = phi.to_vec();
    let (mut value, mut plan) = problem.semidual(phi);
    for step_no in 1..=budget {
        let rows: Vec<f64> = plan.row_iter().map(|r| r.sum()).collect();
        let target = problem.row_target(phi);
        let grad = DVector::from_fn(n, |i, _| target[i + free0] - rows[i + free0]);

        let mut neg_h = DMatrix::from_fn(n, n, |i, l| {
            let (j, jj) = (i + free0, l + free0);
            let mut h = 0.0;
            for k in (0..d).filter(|&k| problem.active(k)) {
                h -= plan[(j, k)] * plan[(jj, k)] / problem.b[k];
            }
            if j == jj {
                h += rows[j];
            }
            h / problem.eps
        });
        // A ridge proportional to the gradient keeps steps bounded where a
        // row owns whole columns (the semi-dual is then flat) and vanishes at
        // the optimum, preserving fast local convergence.
        let ridge = grad.amax() / problem.cost_scale;
        for i in 0..n {
            neg_h[(i, i)] += ridge;
            if let Some(l) = problem.lambda {
                neg_h[(i, i)] += target[i + free0] / l;
            }
        }
        let Some(step) = newton_direction(neg_h, &grad) else {
            log::debug!("singular Newton system after {step_no} steps");
            return stall(&grad);
        };

        let decrement = grad.dot(&step);
        if decrement <= 4.0 * f64::EPSILON * value.abs().max(1.0) {
            return Outcome::Converged;
        }

        let mut t = 1.0;
        loop {
            for i in 0..n {
                trial[i + free0] = phi[i + free0] + t * step[i];
            }
            let (v, p) = problem.semidual(&trial);
            if v.is_finite() && v >= value + ARMIJO * t * decrement {
                value = v;
                plan = p;
                break;
            }
            t *= 0.5;
            if t < MIN_STEP {
                log::debug!("line search stalled after {step_no} Newton steps");
                return stall(&grad);
            }
        }
        phi.copy_from_slice(&trial);
        let moved = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        if moved / problem.eps < tol {
            log::trace!("Newton polish converged after {step_no} steps");
            return Outcome::Converged;
        }
    }
    Outcome::Exhausted
}

fn stall(grad: &DVector<f64>) -> Outcome {
    if grad.amax() <= STALL_RESIDUAL {
        Outcome::Converged
    } else {
        Outcome::Exhausted
    }
}

fn newton_direction(neg_h: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = neg_h.clone().cholesky() {
        return Some(chol.solve(grad));
    }
    let scale = neg_h.diagonal().amax().max(f64::MIN_POSITIVE);
    let ridged = &neg_h + DMatrix::identity(neg_h.nrows(), neg_h.ncols()) * (1e-12 * scale);
    if let Some(chol) = ridged.cholesky() {
        return Some(chol.solve(grad));
    }
    neg_h.lu().solve(grad)
}
