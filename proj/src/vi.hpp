#pragma once

#include "grad.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "params.hpp"
#include "util.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dgmrf {

// x = nu + s .* eps (reparameterization).
Eigen::VectorXd sample_q(const VariationalParams& var, const Eigen::VectorXd& eps);

// Draws nq reparameterization vectors of length n, sample-major.
std::vector<Eigen::VectorXd> draw_eps(RngStream& rng, int nq, long n);

double elbo_estimate(const DgmrfModel& model, const VariationalParams& var,
                     const Dataset& data, int nq, std::uint64_t seed,
                     double trend_v = 1e-4);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(long dim, double learning_rate = 0.01)
      : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)), lr(learning_rate) {}
};

// One minimizing Adam update (default bias-corrected form).
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad);

struct TrainConfig {
  long iterations = 10000;  // paper-scale runs use 100000
  int nq = 10;
  double lr = 0.01;
  std::uint64_t seed = 1;
  double trend_v = 1e-4;
  int trend_p = 0;  // 0 = no trend block
  long checkpoint_every = 0;
  std::function<void(long iter, const DgmrfModel&, const VariationalParams&)>
      on_checkpoint;
};

struct TrainResult {
  DgmrfModel model;          // parameters with the lowest observed loss
  VariationalParams var;
  double best_loss = 0.0;
  long best_iteration = -1;
  std::vector<double> loss_trace;  // one entry per iteration
};

// Optimizes -ELBO/N over model and variational parameters with Adam.
// Fully reproducible given (model, data, config). Aborts with a diagnostic
// if the loss turns non-finite.
TrainResult train(const DgmrfModel& model, const Dataset& data, const TrainConfig& cfg);

}  // namespace dgmrf
