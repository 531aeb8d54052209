/* C interface to the deep GMRF library: lattice priors built from stacked
 * convolution filters with closed-form log-determinants, variational
 * parameter learning, and conjugate-gradient posterior inference with
 * predictive uncertainty.
 *
 * All functions returning dgmrf_status set a thread-local message
 * retrievable with dgmrf_last_error() on failure. Handles are opaque and
 * owned by the caller via the matching *_free function.
 */
#ifndef DGMRF_H
#define DGMRF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgmrf_status {
  DGMRF_OK = 0,
  DGMRF_ERR_INVALID_ARGUMENT = 1,
  DGMRF_ERR_DIMENSION = 2,
  DGMRF_ERR_IO = 3,
  DGMRF_ERR_PARSE = 4,
  DGMRF_ERR_CONFIG = 5,
  DGMRF_ERR_CONVERGENCE = 6,
  DGMRF_ERR_NONFINITE = 7,
  DGMRF_ERR_UNSUPPORTED = 8,
  DGMRF_ERR_INTERNAL = 9
} dgmrf_status;

const char* dgmrf_status_name(dgmrf_status s);
const char* dgmrf_last_error(void);

/* Flat key=value run settings. */
typedef struct dgmrf_opts_s dgmrf_opts;

dgmrf_status dgmrf_opts_create(dgmrf_opts** out);
void dgmrf_opts_free(dgmrf_opts* opts);
dgmrf_status dgmrf_opts_set(dgmrf_opts* opts, const char* key, const char* value);
/* NULL when the key is unset. */
const char* dgmrf_opts_get(const dgmrf_opts* opts, const char* key);
dgmrf_status dgmrf_opts_load_file(dgmrf_opts* opts, const char* path);
/* Fills subcommand defaults and rejects unknown keys. */
dgmrf_status dgmrf_opts_resolve(dgmrf_opts* opts, const char* subcommand);
dgmrf_status dgmrf_opts_write(const dgmrf_opts* opts, const char* path);

/* Batch runs: read and write files per the resolved options, exactly like
 * the CLI subcommands of the same name. */
dgmrf_status dgmrf_run_gen_toy(const dgmrf_opts* opts);
dgmrf_status dgmrf_run_convert(const dgmrf_opts* opts);
dgmrf_status dgmrf_run_train(const dgmrf_opts* opts);
dgmrf_status dgmrf_run_infer(const dgmrf_opts* opts);
dgmrf_status dgmrf_run_eval(const dgmrf_opts* opts);

/* H x W x C lattice with an observation mask; NaN marks missing pixels in
 * the value arrays and in the text grid format. */
typedef struct dgmrf_grid_s dgmrf_grid;

dgmrf_status dgmrf_grid_create(int32_t h, int32_t w, int32_t c,
                               const double* values, dgmrf_grid** out);
void dgmrf_grid_free(dgmrf_grid* grid);
dgmrf_status dgmrf_grid_load(const char* path, dgmrf_grid** out);
dgmrf_status dgmrf_grid_save(const dgmrf_grid* grid, const char* path);
dgmrf_status dgmrf_grid_dims(const dgmrf_grid* grid, int32_t* h, int32_t* w,
                             int32_t* c);
/* Copies H*W*C values (NaN at missing pixels); cap must be >= H*W*C. */
dgmrf_status dgmrf_grid_values(const dgmrf_grid* grid, double* out, size_t cap);

/* Fitted model: layer parameters, noise level, variational state and the
 * preprocessing metadata needed to reproduce inference. */
typedef struct dgmrf_model_s dgmrf_model;

dgmrf_status dgmrf_model_load(const char* path, dgmrf_model** out);
dgmrf_status dgmrf_model_save(const dgmrf_model* model, const char* path);
void dgmrf_model_free(dgmrf_model* model);

/* Trains on the observed grid (covariates may be NULL; required with
 * trend=1). Options follow the "train" subcommand keys. */
dgmrf_status dgmrf_train(const dgmrf_grid* observed, const dgmrf_grid* covariates,
                         const dgmrf_opts* opts, dgmrf_model** out);

typedef struct dgmrf_summary_s dgmrf_summary;

/* Posterior summary on the original (uncropped, unnormalized) grid.
 * Options follow the "infer" subcommand keys. */
dgmrf_status dgmrf_infer(const dgmrf_model* model, const dgmrf_grid* observed,
                         const dgmrf_grid* covariates, const dgmrf_opts* opts,
                         dgmrf_summary** out);
void dgmrf_summary_free(dgmrf_summary* summary);
/* which: "mean", "sd" or "pred_sd". */
dgmrf_status dgmrf_summary_grid(const dgmrf_summary* summary, const char* which,
                                dgmrf_grid** out);
/* key=value lines: method, cg_delta, cg_iterations, samples, beta stats. */
const char* dgmrf_summary_meta(const dgmrf_summary* summary);

typedef struct dgmrf_scores_s {
  double mae;
  double rmse;
  double crps;
  double interval;
  double coverage;
  int64_t n_scored;
} dgmrf_scores;

/* Scores predictions at pixels observed in `truth` but missing in
 * `observed`. */
dgmrf_status dgmrf_eval(const dgmrf_grid* truth, const dgmrf_grid* observed,
                        const dgmrf_grid* mean, const dgmrf_grid* predictive_sd,
                        dgmrf_scores* out);

#ifdef __cplusplus
}
#endif

#endif /* DGMRF_H */
