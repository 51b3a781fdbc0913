/* C interface to aoilab: age-of-information analysis and simulation for
 * single-server queues with B(n) and P(n) buffer policies.
 *
 * Every call returns an aoilab_status. On failure, aoilab_last_error() gives a
 * message for the calling thread, valid until that thread's next call.
 * Strings returned through char** belong to the caller; release them with
 * aoilab_string_free.
 *
 * Option strings are "key=value" pairs separated by ';' or newlines. */
#ifndef AOILAB_H
#define AOILAB_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define AOILAB_API __declspec(dllexport)
#else
#define AOILAB_API __attribute__((visibility("default")))
#endif

typedef enum aoilab_status {
  AOILAB_OK = 0,
  AOILAB_E_NULL = 1,        /* required pointer argument was NULL */
  AOILAB_E_ARGUMENT = 2,    /* malformed or out-of-range input */
  AOILAB_E_DOMAIN = 3,      /* point outside a transform's domain */
  AOILAB_E_UNSUPPORTED = 4, /* no formula for this policy/law */
  AOILAB_E_NUMERIC = 5,     /* quadrature or inversion did not converge */
  AOILAB_E_SIMULATION = 6,  /* starvation: no successful departure within the event cap */
  AOILAB_E_INTERNAL = 7
} aoilab_status;

AOILAB_API const char* aoilab_version(void);
AOILAB_API const char* aoilab_status_name(aoilab_status status);
AOILAB_API const char* aoilab_last_error(void);
AOILAB_API void aoilab_string_free(char* s);

/* ---- models: policy token (b2, p1, ...), law (exp:<rate>, det:<value>), lambda */

typedef struct aoilab_model aoilab_model;

AOILAB_API aoilab_status aoilab_model_create(const char* policy, const char* dist, double lambda,
                                             aoilab_model** out);
AOILAB_API void aoilab_model_destroy(aoilab_model* model);
/* Traffic intensity lambda * E[sigma]. */
AOILAB_API aoilab_status aoilab_model_rho(const aoilab_model* model, double* out);

AOILAB_API aoilab_status aoilab_mean(const aoilab_model* model, double* out);
AOILAB_API aoilab_status aoilab_variance(const aoilab_model* model, double* out);
AOILAB_API aoilab_status aoilab_transform(const aoilab_model* model, double s_re, double s_im, double* out_re,
                                          double* out_im);
/* Distribution-free limit as rho -> infinity (P1 is unsupported). */
AOILAB_API aoilab_status aoilab_high_traffic_transform(const aoilab_model* model, double s, double* out);

/* Inversion options: method (auto, talbot, euler, trapezoid), nodes, abs_tol.
 * NULL or "" means defaults. Deterministic-service CCDFs are exact unless a
 * method is given. */
AOILAB_API aoilab_status aoilab_density(const aoilab_model* model, double t, const char* options, double* out);
AOILAB_API aoilab_status aoilab_ccdf(const aoilab_model* model, double t, const char* options, double* out);

/* Deterministic-service P1 at load rho (service time 1). */
AOILAB_API aoilab_status aoilab_detp1_density(double rho, double t, const char* options, double* out);
AOILAB_API aoilab_status aoilab_detp1_moment(double rho, int p, double* out);

/* ---- simulation */

typedef struct aoilab_sim aoilab_sim;

AOILAB_API aoilab_status aoilab_sim_create(const aoilab_model* model, aoilab_sim** out);
AOILAB_API void aoilab_sim_destroy(aoilab_sim* sim);
/* Keys: segments, warmup, max_arrivals, seed, replication, replications, jobs,
 * coupling (message|service), batches, grid (comma list), max_events, record_path (0|1). */
AOILAB_API aoilab_status aoilab_sim_configure(aoilab_sim* sim, const char* options);
AOILAB_API aoilab_status aoilab_sim_run(aoilab_sim* sim);
AOILAB_API aoilab_status aoilab_sim_mean(const aoilab_sim* sim, double* out);
AOILAB_API aoilab_status aoilab_sim_variance(const aoilab_sim* sim, double* out);
AOILAB_API aoilab_status aoilab_sim_stats_json(const aoilab_sim* sim, char** out);
/* Reset sequence as CSV: epoch,age,occupancy. Empty with replications > 1. */
AOILAB_API aoilab_status aoilab_sim_path_csv(const aoilab_sim* sim, char** out);

/* ---- experiments; results are JSON or CSV text */

/* Options: preset, policies, dist, rho (comma lists), quantity, t, engine,
 * segments, seed, replications, coupling, jobs, format (csv|json). */
AOILAB_API aoilab_status aoilab_sweep(const char* options, char** out);
/* Options: t (comma list), tol, source (analytic|simulate), segments, seed, coupling. */
AOILAB_API aoilab_status aoilab_order(const char* a, const char* b, const char* dist, double lambda,
                                      const char* options, char** out_json);
/* Coupled runs of `policies` (comma list); reports sup(alpha_i - alpha_j) and
 * violation counts for each consecutive pair. Options as aoilab_sim_configure;
 * coupling defaults to service order here. */
AOILAB_API aoilab_status aoilab_pathwise(const char* policies, const char* dist, double lambda, const char* options,
                                         char** out_json);
AOILAB_API aoilab_status aoilab_high_traffic_check(const char* policy, const char* dist, double rho,
                                                   const char* options, char** out_json);
AOILAB_API aoilab_status aoilab_monotonicity_probe(double m, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
