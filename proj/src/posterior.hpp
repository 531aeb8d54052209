#pragma once

#include "grid.hpp"
#include "model.hpp"
#include "params.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dgmrf {

using LinearVecOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgResult {
  Eigen::VectorXd x;
  long iterations = 0;
  double rel_residual = 0.0;
};

// Unpreconditioned conjugate gradient on a symmetric positive-definite
// operator; stops when ||A x - c|| / ||c|| <= delta. max_iter <= 0 selects
// the default cap 10*sqrt(dim) + 100; exceeding the cap is an error.
CgResult cg_solve(const LinearVecOp& op, const Eigen::VectorXd& rhs, double delta,
                  long max_iter = 0);

// Matrix-free posterior precision
//   Q~ = G^T G + sigma^-2 I_m,
// extended with the trend block
//   [G^T G + s^-2 I_m     s^-2 I_m F      ]
//   [s^-2 F^T I_m         v^2 I + s^-2 F^T I_m F]
// when covariates are attached.
struct PosteriorOperator {
  const DgmrfModel* model = nullptr;
  int H = 0, W = 0, C = 1;
  Eigen::VectorXd mvec;  // observation indicator per scalar entry
  double inv_sigma2 = 1.0;
  const Eigen::MatrixXd* covariates = nullptr;  // HW x p, trend only
  double trend_v = 1e-4;

  long n() const { return static_cast<long>(H) * W * C; }
  long p() const { return covariates ? covariates->cols() : 0; }
  long dim() const { return n() + p(); }

  Eigen::VectorXd matvec(const Eigen::VectorXd& u) const;
  LinearVecOp as_op() const {
    return [this](const Eigen::VectorXd& u) { return matvec(u); };
  }
};

PosteriorOperator make_posterior_operator(const DgmrfModel& model, const Dataset& data,
                                          bool trend = false, double trend_v = 1e-4);

// Right-hand side of the mean equation: -G^T b + sigma^-2 y (stacked with
// sigma^-2 F^T y for the trend block).
Eigen::VectorXd posterior_mean_rhs(const PosteriorOperator& op, const Dataset& data);

CgResult posterior_mean(const PosteriorOperator& op, const Dataset& data,
                        double delta = 1e-7, long max_iter = 0);

// Perturbation (Papandreou-Yuille) draw:
//   x_s = Q~^-1 ( G^T (u1 - b) + sigma^-2 (y + sigma I_m u2) ),
// exact posterior sample for standard normal u1 (dim) and u2 (n).
CgResult posterior_sample(const PosteriorOperator& op, const Dataset& data,
                          const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                          double delta = 1e-7, long max_iter = 0);

// diag(Q~) via gram_diagonal plus the noise and trend contributions.
Eigen::VectorXd posterior_diag(const PosteriorOperator& op);

// Simple Rao-Blackwellized marginal-variance estimate from posterior samples:
//   Var(x_i) ~= 1/Q~_ii + SampleVar_s( x_{s,i} - (Q~ x_s - c)_i / Q~_ii ).
Eigen::VectorXd rbmc_variance(const PosteriorOperator& op,
                              const std::vector<Eigen::VectorXd>& samples,
                              const Eigen::VectorXd& c);

// Plain per-coordinate unbiased sample variance.
Eigen::VectorXd mc_variance(const std::vector<Eigen::VectorXd>& samples);

struct SummarizeConfig {
  double cg_delta = 1e-7;
  long cg_max_iter = 0;
  int var_samples = 100;
  enum class Method { automatic, rbmc, mc } method = Method::automatic;
  bool trend = false;
  double trend_v = 1e-4;
  std::uint64_t seed = 1;
};

struct PosteriorSummary {
  GridTensor mean;           // posterior predictive mean (includes F*beta)
  GridTensor marginal_sd;    // sd of the latent measurement mean
  GridTensor predictive_sd;  // sqrt(marginal_sd^2 + sigma^2)
  Eigen::VectorXd beta_mean, beta_sd;
  std::string method;  // "cg+rbmc", "cg+mc" or "variational"
  double cg_delta = 0.0;
  int samples_used = 0;
  long cg_iterations = 0;  // total across solves
};

// Linear models: exact CG mean plus RBMC (or MC) variances; with a trend
// block the variances come from N_s plain Monte Carlo samples. Non-linear
// models: the variational fit itself.
PosteriorSummary summarize(const DgmrfModel& model, const VariationalParams& var,
                           const Dataset& data, const SummarizeConfig& cfg);

}  // namespace dgmrf
