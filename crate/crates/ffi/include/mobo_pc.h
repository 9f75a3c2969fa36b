#ifndef MOBO_PC_H
#define MOBO_PC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Outcome of a call.
 */
typedef enum MoboStatus {
  MOBO_STATUS_OK = 0,
  MOBO_STATUS_NULL_POINTER = 1,
  MOBO_STATUS_INVALID_ARGUMENT = 2,
  MOBO_STATUS_NUMERIC = 3,
  MOBO_STATUS_CONTRACT = 4,
  MOBO_STATUS_CONFIG = 5,
  MOBO_STATUS_EVALUATION = 6,
  MOBO_STATUS_IO = 7,
  MOBO_STATUS_PANIC = 8,
} MoboStatus;

/*
 The cone of a preference tuple over `num_objectives` objectives.
 */
typedef struct MoboCone MoboCone;

/*
 A fitted Gaussian process for one objective.
 */
typedef struct MoboGp MoboGp;

/*
 Result of an optimisation run on a bundled benchmark.
 */
typedef struct MoboRun MoboRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none failed.

 The string stays valid until the next failing call on the same thread.
 */
const char *mobo_last_error_message(void);

/*
 Clears the last error of this thread.
 */
void mobo_clear_last_error(void);

/*
 Conditions a zero-mean GP with fixed hyperparameters on `n_obs` rows of
 `dim` inputs. `lengthscales` holds `dim` values.
 */
enum MoboStatus mobo_gp_new(const double *inputs,
                            const double *targets,
                            size_t n_obs,
                            size_t dim,
                            double signal_variance,
                            const double *lengthscales,
                            double noise_variance,
                            struct MoboGp **out);

/*
 Fits hyperparameters by maximum marginal likelihood (deterministic in `seed`).
 */
enum MoboStatus mobo_gp_fit(const double *inputs,
                            const double *targets,
                            size_t n_obs,
                            size_t dim,
                            uint64_t seed,
                            struct MoboGp **out);

void mobo_gp_free(struct MoboGp *gp);

size_t mobo_gp_dim(const struct MoboGp *gp);

/*
 Posterior mean and variance at `x` (`dim` values).
 */
enum MoboStatus mobo_gp_posterior(const struct MoboGp *gp,
                                  const double *x,
                                  size_t dim,
                                  double *mean,
                                  double *variance);

/*
 Posterior of the gradient at `x`: `dim` means and the row-major
 `dim x dim` covariance. `covariance` may be null.
 */
enum MoboStatus mobo_gp_gradient(const struct MoboGp *gp,
                                 const double *x,
                                 size_t dim,
                                 double *mean,
                                 double *covariance);

/*
 Builds the cone of the tuple `indices` (most important objective first).
 */
enum MoboStatus mobo_cone_new(const size_t *indices,
                              size_t len,
                              size_t num_objectives,
                              struct MoboCone **out);

void mobo_cone_free(struct MoboCone *cone);

/*
 Whether `v` (one partial derivative per objective) is orthogonal to some
 member of the cone, with the default relative sign tolerance.
 */
enum MoboStatus mobo_cone_contains_perp(const struct MoboCone *cone,
                                        const double *v,
                                        size_t num_objectives,
                                        bool *out);

/*
 Monte-Carlo probability that `x` satisfies every cone, with one model per
 objective.
 */
enum MoboStatus mobo_prob_satisfies(const struct MoboGp *const *models,
                                    size_t num_models,
                                    const struct MoboCone *const *cones,
                                    size_t num_cones,
                                    const double *x,
                                    size_t dim,
                                    size_t samples,
                                    uint64_t key,
                                    double *out);

/*
 Dominated hypervolume (maximisation) of `n` row-major points with `m`
 objectives against the reference point `z`.
 */
enum MoboStatus mobo_hypervolume(const double *points,
                                 size_t n,
                                 size_t m,
                                 const double *z,
                                 double *out);

/*
 Runs a bundled benchmark (all objectives minimised) under the tuple
 `indices`; pass `len = 0` for plain expected hypervolume improvement.
 `initial_design = 0` selects the default size.
 */
enum MoboStatus mobo_run_benchmark(const char *name,
                                   const size_t *indices,
                                   size_t len,
                                   size_t iterations,
                                   size_t initial_design,
                                   uint64_t seed,
                                   struct MoboRun **out);

void mobo_run_free(struct MoboRun *run);

/*
 Whether the run finished its budget (false when it aborted).
 */
bool mobo_run_completed(const struct MoboRun *run);

size_t mobo_run_num_evaluations(const struct MoboRun *run);

size_t mobo_run_pareto_size(const struct MoboRun *run);

/*
 Hypervolume of the final Pareto set, or NaN for a null handle.
 */
double mobo_run_hypervolume(const struct MoboRun *run);

/*
 Fraction of Pareto points satisfying the preference under analytic
 gradients, or NaN when the run had no tuple.
 */
double mobo_run_compliance(const struct MoboRun *run);

/*
 Copies Pareto point `k` into `x` (`dim` values) and `y` (`m` values).
 */
enum MoboStatus mobo_run_pareto_point(const struct MoboRun *run,
                                      size_t k,
                                      double *x,
                                      size_t dim,
                                      double *y,
                                      size_t m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOBO_PC_H */
