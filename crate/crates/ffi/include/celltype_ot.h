#ifndef CELLTYPE_OT_H
#define CELLTYPE_OT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Values 2–4 match the command-line exit codes.
typedef enum CtotStatus {
  CTOT_STATUS_OK = 0,
  CTOT_STATUS_NULL_POINTER = 1,
  CTOT_STATUS_INPUT = 2,
  CTOT_STATUS_CONVERGENCE = 3,
  CTOT_STATUS_CONFIG = 4,
  // Output buffer too small.
  CTOT_STATUS_BUFFER_TOO_SMALL = 5,
  CTOT_STATUS_PANIC = 6,
} CtotStatus;

// Opaque transport plan.
typedef struct CtotPlan CtotPlan;

typedef struct CtotSolverConfig {
  // KL weight on the source marginal (ignored by the balanced solver).
  double lambda;
  // ε as a fraction of the largest cost entry.
  double epsilon_scale;
  size_t max_iters;
  double convergence_tol;
} CtotSolverConfig;

typedef struct CtotDetectionMetrics {
  double precision;
  double recall;
  double f_score;
} CtotDetectionMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library defaults: λ = 1, ε = 1e-3 · max cost, 10000 iterations, tol 1e-10.
struct CtotSolverConfig ctot_solver_config_default(void);

// Library version as a static NUL-terminated string.
const char *ctot_version(void);

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next call into the library from the same thread.
const char *ctot_last_error_message(void);

// Semi-relaxed unbalanced plan. `config` may be NULL for defaults.
//
// # Safety
// `q_src`, `q_tgt` point to `d` doubles, `cost` to `d*d` doubles
// (row-major); `out_plan` is writable.
enum CtotStatus ctot_solve_unbalanced(size_t d,
                                      const double *q_src,
                                      const double *q_tgt,
                                      const double *cost,
                                      const struct CtotSolverConfig *config,
                                      struct CtotPlan **out_plan);

// Balanced plan with both marginals fixed; `config.lambda` is ignored.
//
// # Safety
// As for [`ctot_solve_unbalanced`].
enum CtotStatus ctot_solve_balanced(size_t d,
                                    const double *q_src,
                                    const double *q_tgt,
                                    const double *cost,
                                    const struct CtotSolverConfig *config,
                                    struct CtotPlan **out_plan);

// `W^λ(q_src, q_tgt)`.
//
// # Safety
// As for [`ctot_solve_unbalanced`]; `out_w` is writable.
enum CtotStatus ctot_transport_cost(size_t d,
                                    const double *q_src,
                                    const double *q_tgt,
                                    const double *cost,
                                    const struct CtotSolverConfig *config,
                                    double *out_w);

// Releases a plan. NULL is ignored.
//
// # Safety
// `plan` came from this library and is not used afterwards.
void ctot_plan_free(struct CtotPlan *plan);

// Number of types; 0 for NULL.
//
// # Safety
// `plan` is NULL or a live handle.
size_t ctot_plan_dim(const struct CtotPlan *plan);

// Copies the plan entries, row-major, into `out` (capacity `d*d`).
//
// # Safety
// `plan` is live; `out` has room for `capacity` doubles.
enum CtotStatus ctot_plan_entries(const struct CtotPlan *plan, double *out, size_t capacity);

// Unregularized objective `<π, M> + λ·KL(π1 | q_src)` of the plan.
//
// # Safety
// `plan` is live; `cost` holds `d*d` doubles; `out_w` is writable.
enum CtotStatus ctot_plan_objective(const struct CtotPlan *plan,
                                    const double *cost,
                                    double lambda,
                                    double *out_w);

// Forward transition `H^{t+1|t}`, row-major: entry `[k][j]` is the
// probability of type `k` at `t+1` given type `j` at `t`.
//
// # Safety
// `plan` is live; `out` has room for `capacity` doubles.
enum CtotStatus ctot_forward_transition(const struct CtotPlan *plan, double *out, size_t capacity);

// Backward transition `H^{t|t+1}`, row-major: entry `[j][k]` is the
// probability of type `j` at `t` given type `k` at `t+1`.
//
// # Safety
// As for [`ctot_forward_transition`].
enum CtotStatus ctot_backward_transition(const struct CtotPlan *plan, double *out, size_t capacity);

// `W_t` for each adjacent pair of `n_times` marginals (row-major
// `n_times × d`). Each source marginal is smoothed with `smoothing` first
// when it is positive. Writes `n_times - 1` values.
//
// # Safety
// `marginals` holds `n_times*d` doubles, `cost` `d*d`; `out` has room for
// `capacity` doubles.
enum CtotStatus ctot_w_series(size_t n_times,
                              size_t d,
                              const double *marginals,
                              const double *cost,
                              const struct CtotSolverConfig *config,
                              double smoothing,
                              double *out,
                              size_t capacity);

// Strict local maxima within `±window` above `median + k·MAD`, computed on
// `√W` when `sqrt_scale` is nonzero. Indices go to `out_indices`; the count
// is always written to `out_count`.
//
// # Safety
// `values` holds `n` doubles; `out_indices` has room for `capacity`
// entries; `out_count` is writable.
enum CtotStatus ctot_detect_peaks(const double *values,
                                  size_t n,
                                  size_t window,
                                  double threshold_k,
                                  int32_t sqrt_scale,
                                  size_t *out_indices,
                                  size_t capacity,
                                  size_t *out_count);

// Precision, recall and F-score of `detected` against `truth` (exact index
// match; `truth` must be non-empty).
//
// # Safety
// `truth` holds `n_truth` entries, `detected` `n_detected`; `out` is
// writable.
enum CtotStatus ctot_score_detection(const size_t *truth,
                                     size_t n_truth,
                                     const size_t *detected,
                                     size_t n_detected,
                                     struct CtotDetectionMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLTYPE_OT_H */
