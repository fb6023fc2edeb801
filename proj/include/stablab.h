/* stablab: stochastic stabilization laboratory, public C interface.
 *
 * All functions return stablab_status; STABLAB_OK is 0. On failure,
 * stablab_last_error() returns a thread-local message describing the cause.
 * Objects created by *_create / *_derive calls must be released with the
 * matching *_destroy.
 */
#ifndef STABLAB_H
#define STABLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define STABLAB_API __declspec(dllexport)
#else
#define STABLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stablab_status {
  STABLAB_OK = 0,
  STABLAB_ERR_INTERNAL = 1,
  STABLAB_ERR_VALIDATION = 2,
  STABLAB_ERR_DERIVATION = 3,
  STABLAB_ERR_VERIFICATION = 4,
  STABLAB_ERR_IO = 5,
  STABLAB_ERR_FIT_UNAVAILABLE = 6,
  STABLAB_ERR_WRONG_REGIME = 7,
  STABLAB_ERR_BLOWUP = 8,
  STABLAB_ERR_OVERFLOW = 9,
  STABLAB_ERR_UNSUPPORTED = 10
} stablab_status;

typedef struct stablab_params stablab_params;   /* model parameters */
typedef struct stablab_ledger stablab_ledger;   /* derived Lyapunov constants */
typedef struct stablab_buffer stablab_buffer;   /* owned byte payload */

STABLAB_API const char* stablab_version(void);
STABLAB_API const char* stablab_last_error(void);

/* ---- byte buffers -------------------------------------------------- */

STABLAB_API const char* stablab_buffer_data(const stablab_buffer* buf);
STABLAB_API size_t stablab_buffer_size(const stablab_buffer* buf);
STABLAB_API void stablab_buffer_destroy(stablab_buffer* buf);

/* ---- model parameters ---------------------------------------------- */

/* model_json: {"m":2,"n":3,"q":2.0,"eps_x":1.0,"eps_y":1.0,"h":"identity"}.
 * h is one of identity, neg-identity, sine. Unknown fields are rejected. */
STABLAB_API stablab_status stablab_params_create(const char* model_json,
                                                 stablab_params** out);

/* Caller-supplied coupling. h may be NULL (Hamiltonian values unavailable);
 * h_prime is required; a is the declared floor of |h_prime|. */
STABLAB_API stablab_status stablab_params_create_custom(
    int m, int n, double q, double eps_x, double eps_y, double a,
    double (*h)(double t, void* ctx), double (*h_prime)(double t, void* ctx), void* ctx,
    stablab_params** out);

STABLAB_API void stablab_params_destroy(stablab_params* params);
STABLAB_API stablab_status stablab_params_to_json(const stablab_params* params,
                                                  stablab_buffer** out);

/* ---- model operations ----------------------------------------------- */

/* out_wufxfy = {w, |w|, fx, fy}. */
STABLAB_API stablab_status stablab_drift_fields(const stablab_params* params, double x,
                                                double y, double out_wufxfy[4]);

STABLAB_API stablab_status stablab_hamiltonian(const stablab_params* params, double x,
                                               double y, double* out);

/* L f at (x,y) for partials f = {df/dx, df/dy, d2f/dx2, d2f/dy2}. */
STABLAB_API stablab_status stablab_generator_apply(const stablab_params* params,
                                                   const double partials[4], double x,
                                                   double y, double* out);

STABLAB_API stablab_status stablab_solution_equal(const stablab_params* params, double x0,
                                                  double y0, double t, double out_xy[2]);
STABLAB_API stablab_status stablab_solution_unequal(const stablab_params* params, double x0,
                                                    double y0, double t, double out_xy[2]);

/* *has_blowup is 1 when the noise-free flow blows up in finite time;
 * *t_star is the blow-up time in that case. */
STABLAB_API stablab_status stablab_blowup_time(const stablab_params* params, double x0,
                                               double y0, int* has_blowup, double* t_star);

/* High-accuracy reference integration of the noise-free drift.
 * pure_hamiltonian != 0 drops the |w|^q terms. On blow-up the call still
 * succeeds: *blew_up = 1 and *t_last is the last reliable time; the CSV
 * holds the partial trajectory. */
STABLAB_API stablab_status stablab_ode_reference(const stablab_params* params, double x0,
                                                 double y0, double t_end,
                                                 int pure_hamiltonian, int* blew_up,
                                                 double* t_last, stablab_buffer** csv);

/* ---- Lyapunov ledger ------------------------------------------------ */

STABLAB_API stablab_status stablab_derive_constants(const stablab_params* params,
                                                    stablab_ledger** out);
STABLAB_API void stablab_ledger_destroy(stablab_ledger* ledger);

/* Keys: a, rho, b, k2, k3, c1, c2, c3, C2, C3, b12, b13. */
STABLAB_API stablab_status stablab_ledger_get(const stablab_ledger* ledger, const char* key,
                                              double* out);
STABLAB_API stablab_status stablab_ledger_override(stablab_ledger* ledger, const char* key,
                                                   double value);

/* Ledger constants plus the independent assertion transcript. */
STABLAB_API stablab_status stablab_ledger_to_json(const stablab_params* params,
                                                  const stablab_ledger* ledger,
                                                  stablab_buffer** out);

/* ---- drift verification ---------------------------------------------- */

/* target: v1, v2, v3, v12, v13 or V. *pass reflects the verdict; the JSON
 * report carries max violation, argmax and target-specific fields. The call
 * itself only fails on invalid input or sampler contract violations. */
STABLAB_API stablab_status stablab_verify_drift(const stablab_params* params,
                                                const stablab_ledger* ledger,
                                                const char* target, uint64_t samples,
                                                uint64_t seed, int threads, int* pass,
                                                stablab_buffer** report_json);

/* ---- simulation ------------------------------------------------------ */

/* integrator_json: {"scheme":"tamed_euler","dt":1e-3,"steps":1000,
 *                   "seed":42,"thin":10}; scheme euler is the untamed variant.
 * *blew_up is 1 when an untamed path was truncated at a non-finite state. */
STABLAB_API stablab_status stablab_simulate_path(const stablab_params* params,
                                                 const char* integrator_json, double x0,
                                                 double y0, int* blew_up,
                                                 stablab_buffer** csv);

/* checkpoints must be strictly increasing multiples of dt, the last one at
 * steps*dt or earlier. Either output may be NULL. */
STABLAB_API stablab_status stablab_simulate_ensemble(
    const stablab_params* params, const char* integrator_json, double x0, double y0,
    uint64_t n_paths, const double* checkpoints, size_t n_checkpoints, int threads,
    stablab_buffer** csv, stablab_buffer** binary);

/* ---- ergodicity ------------------------------------------------------- */

/* experiment_json:
 *   {"s0_a":[5,5],"s0_b":[-5,-5],"n_paths":4096,
 *    "checkpoints":[0.5,1,...],"dt":1e-3,"seed":7,"coupled":false}
 * Returns STABLAB_ERR_FIT_UNAVAILABLE when fewer than 3 checkpoints rise
 * above the noise floor; report and series are still written in that case. */
STABLAB_API stablab_status stablab_mixing(const stablab_params* params,
                                          const stablab_ledger* ledger,
                                          const char* experiment_json, int threads,
                                          stablab_buffer** report_json,
                                          stablab_buffer** series_csv);

/* Least-squares fit of d ~ C exp(-rate t); out_C_rate_r2 = {C, rate, R^2}. */
STABLAB_API stablab_status stablab_fit_exponential(const double* times, const double* dists,
                                                   size_t count, double out_C_rate_r2[3]);

/* experiment_json:
 *   {"s0":[0,0],"n_paths":10000,"checkpoints":[1,...,10],"dt":1e-3,"seed":7,
 *    "threshold":25.0} or {...,"quantile":0.995,"quantile_time":5.0,"delta":0.01} */
STABLAB_API stablab_status stablab_stability(const stablab_params* params,
                                             const char* experiment_json, int threads,
                                             stablab_buffer** report_json,
                                             stablab_buffer** series_csv);

#ifdef __cplusplus
}
#endif

#endif /* STABLAB_H */
