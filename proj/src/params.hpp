#pragma once

#include "model.hpp"

#include <Eigen/Core>

namespace dgmrf {

// Mean-field Gaussian q(x) = N(nu, diag(exp(log_s)^2)), with an optional
// independent block for trend coefficients beta.
struct VariationalParams {
  Eigen::VectorXd nu;
  Eigen::VectorXd log_s;
  Eigen::VectorXd nu_beta;
  Eigen::VectorXd log_s_beta;

  bool has_trend() const { return nu_beta.size() > 0; }
  Eigen::VectorXd s() const { return log_s.array().exp(); }
  Eigen::VectorXd s_beta() const { return log_s_beta.array().exp(); }
};

VariationalParams init_variational(const Dataset& d, int trend_p = 0);

// Flat-vector layout of all unconstrained trainable parameters:
// per layer [filter, bias, log_alpha], then log_sigma, then the variational
// block [nu, log_s, nu_beta, log_s_beta].
struct ParamLayout {
  struct LayerSeg {
    long filter_off = -1;
    long filter_n = 0;
    long bias_off = -1;
    long bias_n = 0;
    long alpha_off = -1;
  };
  std::vector<LayerSeg> layers;
  long sigma_off = -1;
  long nu_off = -1;
  long log_s_off = -1;
  long n = 0;  // latent size HWC
  long nu_beta_off = -1;
  long log_s_beta_off = -1;
  long p = 0;  // trend coefficients
  long total = 0;
};

ParamLayout make_layout(const DgmrfModel& model, long n, long p);

Eigen::VectorXd pack_params(const DgmrfModel& model, const VariationalParams& var,
                            const ParamLayout& layout);

void unpack_params(const Eigen::VectorXd& v, const ParamLayout& layout,
                   DgmrfModel& model, VariationalParams& var);

}  // namespace dgmrf
