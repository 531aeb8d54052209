#include "vi.hpp"

#include "error.hpp"
#include "util.hpp"

#include <cmath>
#include <sstream>

namespace dgmrf {

Eigen::VectorXd sample_q(const VariationalParams& var, const Eigen::VectorXd& eps) {
  if (eps.size() != var.nu.size())
    fail(Status::dimension_mismatch, "sample_q: eps length mismatch");
  return var.nu + var.s().cwiseProduct(eps);
}

std::vector<Eigen::VectorXd> draw_eps(RngStream& rng, int nq, long n) {
  std::vector<Eigen::VectorXd> eps(nq);
  for (int i = 0; i < nq; ++i) {
    eps[i].resize(n);
    for (long j = 0; j < n; ++j) eps[i][j] = rng.normal();
  }
  return eps;
}

double elbo_estimate(const DgmrfModel& model, const VariationalParams& var,
                     const Dataset& data, int nq, std::uint64_t seed, double trend_v) {
  RngStream rng(seed);
  const auto eps = draw_eps(rng, nq, data.y.size() + var.nu_beta.size());
  return elbo_with_grad(model, var, data, eps, trend_v, false).value;
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size())
    fail(Status::dimension_mismatch, "adam_step: length mismatch");
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params -= (state.lr / c1) *
            state.m.cwiseQuotient(((state.v / c2).cwiseSqrt().array() + state.eps).matrix());
}

namespace {

std::string nonfinite_diagnostic(long iter, const DgmrfModel& model,
                                 const VariationalParams& var, const Dataset& data,
                                 const std::vector<Eigen::VectorXd>& eps,
                                 double trend_v) {
  std::ostringstream os;
  os << "train: non-finite loss at iteration " << iter;
  double logdet = 0.0;
  for (const Layer& l : model.layers) {
    try {
      logdet += l.logdet(data.y.H, data.y.W);
    } catch (const Error&) {
      logdet = std::numeric_limits<double>::quiet_NaN();
      break;
    }
  }
  if (!std::isfinite(logdet))
    os << " (log-determinant term non-finite)";
  else if (!var.log_s.allFinite() || !var.nu.allFinite())
    os << " (variational parameters non-finite)";
  else {
    const double v = elbo_with_grad(model, var, data, eps, trend_v, false).value;
    if (!std::isfinite(v)) os << " (data/prior term non-finite)";
  }
  return os.str();
}

}  // namespace

TrainResult train(const DgmrfModel& model0, const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  DgmrfModel model = model0;
  model.validate();
  const long n = data.y.size();
  const long p = cfg.trend_p;
  if (p > 0 && !data.covariates)
    fail(Status::config_error, "train: trend requested without covariates");
  VariationalParams var = init_variational(data, static_cast<int>(p));
  const ParamLayout layout = make_layout(model, n, p);

  Eigen::VectorXd params = pack_params(model, var, layout);
  AdamState adam(layout.total, cfg.lr);
  RngStream rng(cfg.seed);

  TrainResult out;
  out.model = model;
  out.var = var;
  out.best_loss = std::numeric_limits<double>::infinity();
  out.loss_trace.reserve(cfg.iterations);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (long iter = 0; iter < cfg.iterations; ++iter) {
    const auto eps = draw_eps(rng, cfg.nq, n + p);
    unpack_params(params, layout, model, var);
    ElboResult e = elbo_with_grad(model, var, data, eps, cfg.trend_v, true);
    const double loss = -e.value * inv_n;
    if (!std::isfinite(loss))
      fail(Status::non_finite,
           nonfinite_diagnostic(iter, model, var, data, eps, cfg.trend_v));
    out.loss_trace.push_back(loss);
    if (loss < out.best_loss) {
      out.best_loss = loss;
      out.best_iteration = iter;
      out.model = model;
      out.var = var;
    }
    Eigen::VectorXd grad = -inv_n * e.grad;
    adam_step(adam, params, grad);
    if (cfg.checkpoint_every > 0 && cfg.on_checkpoint &&
        (iter + 1) % cfg.checkpoint_every == 0)
      cfg.on_checkpoint(iter + 1, out.model, out.var);
  }
  if (cfg.iterations == 0) {
    out.best_loss = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace dgmrf
