#include "dgmrf/dgmrf.h"

#include "data_io.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "runner.hpp"
#include "serialize.hpp"
#include "util.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <string>

namespace {

thread_local std::string g_last_error;

dgmrf_status to_status(dgmrf::Status s) {
  return static_cast<dgmrf_status>(static_cast<int>(s));
}

template <typename Fn>
dgmrf_status guarded(Fn&& fn) {
  try {
    fn();
    return DGMRF_OK;
  } catch (const dgmrf::Error& e) {
    g_last_error = e.what();
    return to_status(e.status());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DGMRF_ERR_INTERNAL;
  }
}

}  // namespace

struct dgmrf_opts_s {
  dgmrf::Options opts;
};

struct dgmrf_grid_s {
  dgmrf::Dataset data;  // mask tracks the NaN pattern
};

struct dgmrf_model_s {
  dgmrf::Checkpoint ckpt;
};

struct dgmrf_summary_s {
  dgmrf::GridTensor mean, sd, pred_sd;
  std::string meta;
};

extern "C" {

const char* dgmrf_status_name(dgmrf_status s) {
  switch (s) {
    case DGMRF_OK: return "DGMRF_OK";
    case DGMRF_ERR_INVALID_ARGUMENT: return "DGMRF_ERR_INVALID_ARGUMENT";
    case DGMRF_ERR_DIMENSION: return "DGMRF_ERR_DIMENSION";
    case DGMRF_ERR_IO: return "DGMRF_ERR_IO";
    case DGMRF_ERR_PARSE: return "DGMRF_ERR_PARSE";
    case DGMRF_ERR_CONFIG: return "DGMRF_ERR_CONFIG";
    case DGMRF_ERR_CONVERGENCE: return "DGMRF_ERR_CONVERGENCE";
    case DGMRF_ERR_NONFINITE: return "DGMRF_ERR_NONFINITE";
    case DGMRF_ERR_UNSUPPORTED: return "DGMRF_ERR_UNSUPPORTED";
    case DGMRF_ERR_INTERNAL: return "DGMRF_ERR_INTERNAL";
  }
  return "DGMRF_ERR_UNKNOWN";
}

const char* dgmrf_last_error(void) { return g_last_error.c_str(); }

dgmrf_status dgmrf_opts_create(dgmrf_opts** out) {
  return guarded([&] { *out = new dgmrf_opts_s(); });
}

void dgmrf_opts_free(dgmrf_opts* opts) { delete opts; }

dgmrf_status dgmrf_opts_set(dgmrf_opts* opts, const char* key, const char* value) {
  return guarded([&] {
    if (!opts || !key || !value)
      dgmrf::fail(dgmrf::Status::invalid_argument, "opts_set: null argument");
    opts->opts.set(key, value);
  });
}

const char* dgmrf_opts_get(const dgmrf_opts* opts, const char* key) {
  if (!opts || !key || !opts->opts.has(key)) return nullptr;
  return opts->opts.get(key).c_str();
}

dgmrf_status dgmrf_opts_load_file(dgmrf_opts* opts, const char* path) {
  return guarded([&] { opts->opts.load_file(path); });
}

dgmrf_status dgmrf_opts_resolve(dgmrf_opts* opts, const char* subcommand) {
  return guarded([&] { dgmrf::resolve_options(opts->opts, subcommand); });
}

dgmrf_status dgmrf_opts_write(const dgmrf_opts* opts, const char* path) {
  return guarded([&] { opts->opts.write_file(path); });
}

dgmrf_status dgmrf_run_gen_toy(const dgmrf_opts* opts) {
  return guarded([&] { dgmrf::run_gen_toy(opts->opts); });
}

dgmrf_status dgmrf_run_convert(const dgmrf_opts* opts) {
  return guarded([&] { dgmrf::run_convert(opts->opts); });
}

dgmrf_status dgmrf_run_train(const dgmrf_opts* opts) {
  return guarded([&] { dgmrf::run_train(opts->opts); });
}

dgmrf_status dgmrf_run_infer(const dgmrf_opts* opts) {
  return guarded([&] { dgmrf::run_infer(opts->opts); });
}

dgmrf_status dgmrf_run_eval(const dgmrf_opts* opts) {
  return guarded([&] { dgmrf::run_eval(opts->opts); });
}

dgmrf_status dgmrf_grid_create(int32_t h, int32_t w, int32_t c, const double* values,
                               dgmrf_grid** out) {
  return guarded([&] {
    if (h < 1 || w < 1 || c < 1 || !values || !out)
      dgmrf::fail(dgmrf::Status::invalid_argument, "grid_create: bad arguments");
    auto* g = new dgmrf_grid_s();
    g->data.y = dgmrf::GridTensor(h, w, c);
    g->data.mask = dgmrf::Mask(h, w, 1);
    long k = 0;
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int ch = 0; ch < c; ++ch, ++k) {
          if (std::isnan(values[k]))
            g->data.mask.set(r, col, 0);
          else
            g->data.y.values[k] = values[k];
        }
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        if (!g->data.mask.at(r, col))
          for (int ch = 0; ch < c; ++ch) g->data.y.at(r, col, ch) = 0.0;
    *out = g;
  });
}

void dgmrf_grid_free(dgmrf_grid* grid) { delete grid; }

dgmrf_status dgmrf_grid_load(const char* path, dgmrf_grid** out) {
  return guarded([&] {
    auto* g = new dgmrf_grid_s();
    g->data = dgmrf::load_grid(path);
    *out = g;
  });
}

dgmrf_status dgmrf_grid_save(const dgmrf_grid* grid, const char* path) {
  return guarded([&] { dgmrf::save_grid(path, grid->data.y, grid->data.mask); });
}

dgmrf_status dgmrf_grid_dims(const dgmrf_grid* grid, int32_t* h, int32_t* w,
                             int32_t* c) {
  return guarded([&] {
    if (!grid) dgmrf::fail(dgmrf::Status::invalid_argument, "grid_dims: null grid");
    if (h) *h = grid->data.y.H;
    if (w) *w = grid->data.y.W;
    if (c) *c = grid->data.y.C;
  });
}

dgmrf_status dgmrf_grid_values(const dgmrf_grid* grid, double* out, size_t cap) {
  return guarded([&] {
    const long n = grid->data.y.size();
    if (cap < static_cast<size_t>(n))
      dgmrf::fail(dgmrf::Status::invalid_argument, "grid_values: buffer too small");
    const double nan = std::nan("");
    long k = 0;
    for (int r = 0; r < grid->data.y.H; ++r)
      for (int c = 0; c < grid->data.y.W; ++c)
        for (int ch = 0; ch < grid->data.y.C; ++ch, ++k)
          out[k] = grid->data.mask.at(r, c) ? grid->data.y.at(r, c, ch) : nan;
  });
}

dgmrf_status dgmrf_model_load(const char* path, dgmrf_model** out) {
  return guarded([&] {
    auto* m = new dgmrf_model_s();
    m->ckpt = dgmrf::load_checkpoint(path);
    *out = m;
  });
}

dgmrf_status dgmrf_model_save(const dgmrf_model* model, const char* path) {
  return guarded([&] { dgmrf::save_checkpoint(path, model->ckpt); });
}

void dgmrf_model_free(dgmrf_model* model) { delete model; }

namespace {

Eigen::MatrixXd covariate_matrix(const dgmrf_grid* covariates) {
  const dgmrf::GridTensor& t = covariates->data.y;
  const long rows = static_cast<long>(t.H) * t.W;
  Eigen::MatrixXd f(rows, t.C);
  for (long r = 0; r < rows; ++r)
    for (int c = 0; c < t.C; ++c) f(r, c) = t.values[r * t.C + c];
  return f;
}

}  // namespace

dgmrf_status dgmrf_train(const dgmrf_grid* observed, const dgmrf_grid* covariates,
                         const dgmrf_opts* opts, dgmrf_model** out) {
  return guarded([&] {
    if (!observed || !opts || !out)
      dgmrf::fail(dgmrf::Status::invalid_argument, "train: null argument");
    dgmrf::Options resolved = opts->opts;
    dgmrf::resolve_options(resolved, "train");
    dgmrf::Dataset data = observed->data;
    if (covariates) data.covariates = covariate_matrix(covariates);
    auto* m = new dgmrf_model_s();
    m->ckpt = dgmrf::train_from_options(data, resolved);
    *out = m;
  });
}

dgmrf_status dgmrf_infer(const dgmrf_model* model, const dgmrf_grid* observed,
                         const dgmrf_grid* covariates, const dgmrf_opts* opts,
                         dgmrf_summary** out) {
  return guarded([&] {
    if (!model || !observed || !opts || !out)
      dgmrf::fail(dgmrf::Status::invalid_argument, "infer: null argument");
    dgmrf::Options resolved = opts->opts;
    dgmrf::resolve_options(resolved, "infer");
    dgmrf::Dataset data = observed->data;
    if (covariates) data.covariates = covariate_matrix(covariates);
    auto* s = new dgmrf_summary_s();
    const dgmrf::PosteriorSummary summary = dgmrf::infer_from_checkpoint(
        model->ckpt, data, resolved, &s->mean, &s->sd, &s->pred_sd);
    std::ostringstream meta;
    meta << "method=" << summary.method << "\n"
         << "cg_delta=" << dgmrf::format_double(summary.cg_delta) << "\n"
         << "cg_iterations=" << summary.cg_iterations << "\n"
         << "samples=" << summary.samples_used << "\n";
    if (summary.beta_mean.size() > 0) {
      meta << "beta_mean=";
      for (long i = 0; i < summary.beta_mean.size(); ++i)
        meta << (i ? " " : "") << dgmrf::format_double(summary.beta_mean[i]);
      meta << "\nbeta_sd=";
      for (long i = 0; i < summary.beta_sd.size(); ++i)
        meta << (i ? " " : "") << dgmrf::format_double(summary.beta_sd[i]);
      meta << "\n";
    }
    s->meta = meta.str();
    *out = s;
  });
}

void dgmrf_summary_free(dgmrf_summary* summary) { delete summary; }

dgmrf_status dgmrf_summary_grid(const dgmrf_summary* summary, const char* which,
                                dgmrf_grid** out) {
  return guarded([&] {
    if (!summary || !which || !out)
      dgmrf::fail(dgmrf::Status::invalid_argument, "summary_grid: null argument");
    const dgmrf::GridTensor* src = nullptr;
    if (std::strcmp(which, "mean") == 0) src = &summary->mean;
    if (std::strcmp(which, "sd") == 0) src = &summary->sd;
    if (std::strcmp(which, "pred_sd") == 0) src = &summary->pred_sd;
    if (!src)
      dgmrf::fail(dgmrf::Status::invalid_argument,
                  "summary_grid: which must be mean, sd or pred_sd");
    auto* g = new dgmrf_grid_s();
    g->data.y = *src;
    g->data.mask = dgmrf::Mask(src->H, src->W, 1);
    *out = g;
  });
}

const char* dgmrf_summary_meta(const dgmrf_summary* summary) {
  return summary ? summary->meta.c_str() : nullptr;
}

dgmrf_status dgmrf_eval(const dgmrf_grid* truth, const dgmrf_grid* observed,
                        const dgmrf_grid* mean, const dgmrf_grid* predictive_sd,
                        dgmrf_scores* out) {
  return guarded([&] {
    if (!truth || !observed || !mean || !predictive_sd || !out)
      dgmrf::fail(dgmrf::Status::invalid_argument, "eval: null argument");
    const dgmrf::Mask test = dgmrf::derive_test_mask(truth->data, observed->data);
    const dgmrf::ScoreReport rep = dgmrf::eval_grids(
        truth->data.y, test, mean->data.y, predictive_sd->data.y, 0.05);
    out->mae = rep.mae;
    out->rmse = rep.rmse;
    out->crps = rep.crps;
    out->interval = rep.interval;
    out->coverage = rep.coverage;
    out->n_scored = rep.n_scored;
  });
}

}  // extern "C"
