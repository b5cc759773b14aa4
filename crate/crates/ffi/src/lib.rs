//! C ABI over `celltype-ot`.
//!
//! Every fallible function returns a [`CtotStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`ctot_last_error_message`]. Matrices cross the boundary as
//! row-major `double` arrays of length `d * d`. Plans are opaque handles owned
//! by the caller and released with [`ctot_plan_free`].
//!
//! Panics never unwind into C; they surface as `CTOT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use celltype_ot::changepoint::{
    score_detection, solve_pairs, w_series_from_plans, PeakDetector, PeakScale,
};
use celltype_ot::trajectory::{backward_transition, forward_transition, TransitionMatrix};
use celltype_ot::uot::{self, CostMatrix, Epsilon, SolverConfig, TransportPlan};
use celltype_ot::{Error, ErrorKind, Marginal};

/// Status codes. Values 2–4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtotStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Convergence = 3,
    Config = 4,
    /// Output buffer too small.
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtotSolverConfig {
    /// KL weight on the source marginal (ignored by the balanced solver).
    pub lambda: f64,
    /// ε as a fraction of the largest cost entry.
    pub epsilon_scale: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CtotDetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Opaque transport plan.
pub struct CtotPlan(TransportPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(CtotStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(match e.kind() {
            ErrorKind::Input => CtotStatus::Input,
            ErrorKind::Convergence => CtotStatus::Convergence,
            ErrorKind::Config => CtotStatus::Config,
        })
    }
}

fn fail(status: CtotStatus, message: &str) -> Fail {
    set_error(message.to_owned());
    Fail(status)
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> CtotStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CtotStatus::Ok,
        Ok(Err(Fail(status))) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CtotStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(CtotStatus::NullPointer, &format!("{name} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| fail(CtotStatus::NullPointer, &format!("{name} is null")))
}

unsafe fn write_buffer(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Fail> {
    if capacity < src.len() {
        return Err(fail(
            CtotStatus::BufferTooSmall,
            &format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    if out.is_null() {
        return Err(fail(CtotStatus::NullPointer, "out is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

impl CtotSolverConfig {
    fn to_core(self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            epsilon: Epsilon::RelativeToMaxCost(self.epsilon_scale),
            max_iters: self.max_iters,
            convergence_tol: self.convergence_tol,
        }
    }
}

unsafe fn config(p: *const CtotSolverConfig) -> Result<SolverConfig, Fail> {
    match p.as_ref() {
        Some(c) => Ok(c.to_core()),
        None => Ok(SolverConfig::default()),
    }
}

unsafe fn problem(
    d: usize,
    q_src: *const f64,
    q_tgt: *const f64,
    cost: *const f64,
) -> Result<(Marginal, Marginal, CostMatrix), Fail> {
    if d == 0 {
        return Err(fail(CtotStatus::Input, "d must be at least 1"));
    }
    let src = Marginal::new(input(q_src, d, "q_src")?.to_vec())?;
    let tgt = Marginal::new(input(q_tgt, d, "q_tgt")?.to_vec())?;
    let cost = CostMatrix::from_row_major(d, input(cost, d * d, "cost")?)?;
    Ok((src, tgt, cost))
}

/// Library defaults: λ = 1, ε = 1e-3 · max cost, 10000 iterations, tol 1e-10.
#[no_mangle]
pub extern "C" fn ctot_solver_config_default() -> CtotSolverConfig {
    let c = SolverConfig::default();
    CtotSolverConfig {
        lambda: c.lambda,
        epsilon_scale: match c.epsilon {
            Epsilon::RelativeToMaxCost(s) => s,
            Epsilon::Absolute(e) => e,
        },
        max_iters: c.max_iters,
        convergence_tol: c.convergence_tol,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ctot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Semi-relaxed unbalanced plan. `config` may be NULL for defaults.
///
/// # Safety
/// `q_src`, `q_tgt` point to `d` doubles, `cost` to `d*d` doubles
/// (row-major); `out_plan` is writable.
#[no_mangle]
pub unsafe extern "C" fn ctot_solve_unbalanced(
    d: usize,
    q_src: *const f64,
    q_tgt: *const f64,
    cost: *const f64,
    config: *const CtotSolverConfig,
    out_plan: *mut *mut CtotPlan,
) -> CtotStatus {
    guard(|| {
        let out = output(out_plan, "out_plan")?;
        let (src, tgt, c) = problem(d, q_src, q_tgt, cost)?;
        let plan = uot::solve_unbalanced(&src, &tgt, &c, &self::config(config)?)?;
        *out = Box::into_raw(Box::new(CtotPlan(plan)));
        Ok(())
    })
}

/// Balanced plan with both marginals fixed; `config.lambda` is ignored.
///
/// # Safety
/// As for [`ctot_solve_unbalanced`].
#[no_mangle]
pub unsafe extern "C" fn ctot_solve_balanced(
    d: usize,
    q_src: *const f64,
    q_tgt: *const f64,
    cost: *const f64,
    config: *const CtotSolverConfig,
    out_plan: *mut *mut CtotPlan,
) -> CtotStatus {
    guard(|| {
        let out = output(out_plan, "out_plan")?;
        let (src, tgt, c) = problem(d, q_src, q_tgt, cost)?;
        let plan = uot::solve_balanced(&src, &tgt, &c, &self::config(config)?)?;
        *out = Box::into_raw(Box::new(CtotPlan(plan)));
        Ok(())
    })
}

/// `W^λ(q_src, q_tgt)`.
///
/// # Safety
/// As for [`ctot_solve_unbalanced`]; `out_w` is writable.
#[no_mangle]
pub unsafe extern "C" fn ctot_transport_cost(
    d: usize,
    q_src: *const f64,
    q_tgt: *const f64,
    cost: *const f64,
    config: *const CtotSolverConfig,
    out_w: *mut f64,
) -> CtotStatus {
    guard(|| {
        let out = output(out_w, "out_w")?;
        let (src, tgt, c) = problem(d, q_src, q_tgt, cost)?;
        *out = uot::transport_cost(&src, &tgt, &c, &self::config(config)?)?;
        Ok(())
    })
}

/// Releases a plan. NULL is ignored.
///
/// # Safety
/// `plan` came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctot_plan_free(plan: *mut CtotPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Number of types; 0 for NULL.
///
/// # Safety
/// `plan` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctot_plan_dim(plan: *const CtotPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.dim())
}

unsafe fn plan_ref<'a>(plan: *const CtotPlan) -> Result<&'a TransportPlan, Fail> {
    plan.as_ref()
        .map(|p| &p.0)
        .ok_or_else(|| fail(CtotStatus::NullPointer, "plan is null"))
}

fn row_major(d: usize, at: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .map(|(r, c)| at(r, c))
        .collect()
}

/// Copies the plan entries, row-major, into `out` (capacity `d*d`).
///
/// # Safety
/// `plan` is live; `out` has room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctot_plan_entries(
    plan: *const CtotPlan,
    out: *mut f64,
    capacity: usize,
) -> CtotStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        write_buffer(&row_major(p.dim(), |j, k| p.get(j, k)), out, capacity)
    })
}

/// Unregularized objective `<π, M> + λ·KL(π1 | q_src)` of the plan.
///
/// # Safety
/// `plan` is live; `cost` holds `d*d` doubles; `out_w` is writable.
#[no_mangle]
pub unsafe extern "C" fn ctot_plan_objective(
    plan: *const CtotPlan,
    cost: *const f64,
    lambda: f64,
    out_w: *mut f64,
) -> CtotStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        let out = output(out_w, "out_w")?;
        let c = CostMatrix::from_row_major(p.dim(), input(cost, p.dim() * p.dim(), "cost")?)?;
        *out = p.unbalanced_objective(&c, lambda);
        Ok(())
    })
}

unsafe fn write_transition(
    h: TransitionMatrix,
    out: *mut f64,
    capacity: usize,
) -> Result<(), Fail> {
    write_buffer(&row_major(h.dim(), |r, c| h.get(r, c)), out, capacity)
}

/// Forward transition `H^{t+1|t}`, row-major: entry `[k][j]` is the
/// probability of type `k` at `t+1` given type `j` at `t`.
///
/// # Safety
/// `plan` is live; `out` has room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctot_forward_transition(
    plan: *const CtotPlan,
    out: *mut f64,
    capacity: usize,
) -> CtotStatus {
    guard(|| write_transition(forward_transition(plan_ref(plan)?, 0), out, capacity))
}

/// Backward transition `H^{t|t+1}`, row-major: entry `[j][k]` is the
/// probability of type `j` at `t` given type `k` at `t+1`.
///
/// # Safety
/// As for [`ctot_forward_transition`].
#[no_mangle]
pub unsafe extern "C" fn ctot_backward_transition(
    plan: *const CtotPlan,
    out: *mut f64,
    capacity: usize,
) -> CtotStatus {
    guard(|| write_transition(backward_transition(plan_ref(plan)?, 0), out, capacity))
}

/// `W_t` for each adjacent pair of `n_times` marginals (row-major
/// `n_times × d`). Each source marginal is smoothed with `smoothing` first
/// when it is positive. Writes `n_times - 1` values.
///
/// # Safety
/// `marginals` holds `n_times*d` doubles, `cost` `d*d`; `out` has room for
/// `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctot_w_series(
    n_times: usize,
    d: usize,
    marginals: *const f64,
    cost: *const f64,
    config: *const CtotSolverConfig,
    smoothing: f64,
    out: *mut f64,
    capacity: usize,
) -> CtotStatus {
    guard(|| {
        if d == 0 {
            return Err(fail(CtotStatus::Input, "d must be at least 1"));
        }
        let raw = input(marginals, n_times * d, "marginals")?;
        let qs = raw
            .chunks(d)
            .map(|row| Marginal::new(row.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let c = CostMatrix::from_row_major(d, input(cost, d * d, "cost")?)?;
        let cfg = self::config(config)?;
        let plans = solve_pairs(&qs, &c, &cfg, (smoothing > 0.0).then_some(smoothing))?;
        write_buffer(
            &w_series_from_plans(&plans, &c, cfg.lambda).values,
            out,
            capacity,
        )
    })
}

/// Strict local maxima within `±window` above `median + k·MAD`, computed on
/// `√W` when `sqrt_scale` is nonzero. Indices go to `out_indices`; the count
/// is always written to `out_count`.
///
/// # Safety
/// `values` holds `n` doubles; `out_indices` has room for `capacity`
/// entries; `out_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn ctot_detect_peaks(
    values: *const f64,
    n: usize,
    window: usize,
    threshold_k: f64,
    sqrt_scale: i32,
    out_indices: *mut usize,
    capacity: usize,
    out_count: *mut usize,
) -> CtotStatus {
    guard(|| {
        let count = output(out_count, "out_count")?;
        let det = PeakDetector {
            window,
            threshold_k,
            scale: if sqrt_scale != 0 {
                PeakScale::Sqrt
            } else {
                PeakScale::Linear
            },
        };
        let found = det.detect_values(input(values, n, "values")?)?.detected;
        *count = found.len();
        if capacity < found.len() {
            return Err(fail(
                CtotStatus::BufferTooSmall,
                &format!("buffer holds {capacity} indices, {} found", found.len()),
            ));
        }
        if !found.is_empty() {
            if out_indices.is_null() {
                return Err(fail(CtotStatus::NullPointer, "out_indices is null"));
            }
            ptr::copy_nonoverlapping(found.as_ptr(), out_indices, found.len());
        }
        Ok(())
    })
}

/// Precision, recall and F-score of `detected` against `truth` (exact index
/// match; `truth` must be non-empty).
///
/// # Safety
/// `truth` holds `n_truth` entries, `detected` `n_detected`; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ctot_score_detection(
    truth: *const usize,
    n_truth: usize,
    detected: *const usize,
    n_detected: usize,
    out: *mut CtotDetectionMetrics,
) -> CtotStatus {
    guard(|| {
        let out = output(out, "out")?;
        let m = score_detection(
            input(truth, n_truth, "truth")?,
            input(detected, n_detected, "detected")?,
        )?;
        *out = CtotDetectionMetrics {
            precision: m.precision,
            recall: m.recall,
            f_score: m.f_score,
        };
        Ok(())
    })
}
