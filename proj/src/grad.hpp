#pragma once

#include "grid.hpp"
#include "model.hpp"
#include "params.hpp"

#include <Eigen/Core>

#include <vector>

namespace dgmrf {

// Vector-Jacobian product of one layer at the given input.
struct LayerVjp {
  GridTensor input_cotangent;   // w.r.t. the layer's (pre-rotation) input
  Eigen::VectorXd filter_grad;  // order of Layer::get_filter_params
  Eigen::VectorXd bias_grad;    // per out channel
  double log_alpha_grad = 0.0;  // through psi(h)'s dependence on alpha
};

LayerVjp layer_vjp(const Layer& layer, const GridTensor& input,
                   const GridTensor& upstream);

// Same, with the forward pieces already at hand (conv input after rotation and
// pre-activation h).
LayerVjp layer_vjp_at(const Layer& layer, const GridTensor& conv_input,
                      const GridTensor& pre_act, const GridTensor& upstream);

// Analytic gradient of the layer's log-determinant w.r.t. its unconstrained
// filter parameters (chain rule through the rho/eta reparameterization).
Eigen::VectorXd logdet_grad(const Layer& layer, int H, int W);

struct ElboResult {
  double value = 0.0;
  Eigen::VectorXd grad;  // ParamLayout order; empty when gradients are off
};

// ELBO estimate for the given reparameterization draws (each eps vector has
// length N, or N+p with a trend block), and its exact gradient with respect
// to every trainable parameter. Pure function of (model, var, data, eps).
ElboResult elbo_with_grad(const DgmrfModel& model, const VariationalParams& var,
                          const Dataset& data,
                          const std::vector<Eigen::VectorXd>& eps,
                          double trend_v = 1e-4, bool with_grad = true);

inline ElboResult elbo_grad(const DgmrfModel& model, const VariationalParams& var,
                            const Dataset& data,
                            const std::vector<Eigen::VectorXd>& eps,
                            double trend_v = 1e-4) {
  return elbo_with_grad(model, var, data, eps, trend_v, true);
}

// Constant omitted from the ELBO (2*pi entropy/prior/likelihood terms);
// adding it makes the value comparable to an exact log marginal likelihood.
double elbo_omitted_constant(long n, long m_values, long p = 0);

}  // namespace dgmrf
