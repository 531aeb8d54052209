#include "posterior.hpp"

#include "error.hpp"
#include "util.hpp"

#include <cmath>
#include <sstream>

namespace dgmrf {

CgResult cg_solve(const LinearVecOp& op, const Eigen::VectorXd& rhs, double delta,
                  long max_iter) {
  const long dim = rhs.size();
  if (!(delta > 0.0)) fail(Status::invalid_argument, "cg_solve: delta must be > 0");
  if (max_iter <= 0)
    max_iter = 10 * static_cast<long>(std::lround(std::sqrt(static_cast<double>(dim)))) + 100;
  CgResult res;
  res.x = Eigen::VectorXd::Zero(dim);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return res;
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  for (long it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd ap = op(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0))
      fail(Status::convergence_failure, "cg_solve: operator not positive definite");
    const double alpha = rs / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    res.iterations = it;
    res.rel_residual = std::sqrt(rs_new) / rhs_norm;
    if (res.rel_residual <= delta) return res;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  std::ostringstream os;
  os << "cg_solve: no convergence in " << max_iter
     << " iterations (relative residual " << res.rel_residual << ", tolerance "
     << delta << ")";
  fail(Status::convergence_failure, os.str());
}

Eigen::VectorXd PosteriorOperator::matvec(const Eigen::VectorXd& u) const {
  if (u.size() != dim())
    fail(Status::dimension_mismatch, "posterior matvec: length mismatch");
  const Eigen::VectorXd ux = u.head(n());
  GridTensor gu = forward_linear(*model, devectorize(ux, H, W, C));
  Eigen::VectorXd out_x = adjoint_linear(*model, gu).values;
  if (p() == 0) {
    out_x += inv_sigma2 * mvec.cwiseProduct(ux);
    return out_x;
  }
  const Eigen::VectorXd ub = u.tail(p());
  const Eigen::VectorXd masked = mvec.cwiseProduct(ux + (*covariates) * ub);
  out_x += inv_sigma2 * masked;
  Eigen::VectorXd out(dim());
  out.head(n()) = out_x;
  out.tail(p()) = trend_v * trend_v * ub + inv_sigma2 * (covariates->transpose() * masked);
  return out;
}

PosteriorOperator make_posterior_operator(const DgmrfModel& model, const Dataset& data,
                                          bool trend, double trend_v) {
  if (!model.linear())
    fail(Status::unsupported, "posterior operator: model is not linear");
  PosteriorOperator op;
  op.model = &model;
  op.H = data.y.H;
  op.W = data.y.W;
  op.C = data.y.C;
  op.inv_sigma2 = std::exp(-2.0 * model.log_sigma);
  op.mvec.resize(op.n());
  for (int r = 0; r < op.H; ++r)
    for (int c = 0; c < op.W; ++c)
      for (int ch = 0; ch < op.C; ++ch)
        op.mvec[data.y.index(r, c, ch)] = data.mask.at(r, c) ? 1.0 : 0.0;
  if (trend) {
    if (!data.covariates)
      fail(Status::config_error, "posterior operator: trend requires covariates");
    if (op.C != 1)
      fail(Status::unsupported, "posterior operator: trend requires C == 1");
    op.covariates = &*data.covariates;
    op.trend_v = trend_v;
  }
  return op;
}

Eigen::VectorXd posterior_mean_rhs(const PosteriorOperator& op, const Dataset& data) {
  const Eigen::VectorXd b = model_bias(*op.model, op.H, op.W);
  const Eigen::VectorXd gtb =
      adjoint_linear(*op.model, devectorize(b, op.H, op.W, op.C)).values;
  const Eigen::VectorXd my = op.mvec.cwiseProduct(data.y.values);
  Eigen::VectorXd rhs(op.dim());
  rhs.head(op.n()) = -gtb + op.inv_sigma2 * my;
  if (op.p() > 0) rhs.tail(op.p()) = op.inv_sigma2 * (op.covariates->transpose() * my);
  return rhs;
}

CgResult posterior_mean(const PosteriorOperator& op, const Dataset& data, double delta,
                        long max_iter) {
  return cg_solve(op.as_op(), posterior_mean_rhs(op, data), delta, max_iter);
}

CgResult posterior_sample(const PosteriorOperator& op, const Dataset& data,
                          const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                          double delta, long max_iter) {
  if (u1.size() != op.dim() || u2.size() != op.n())
    fail(Status::dimension_mismatch, "posterior_sample: perturbation length mismatch");
  const Eigen::VectorXd b = model_bias(*op.model, op.H, op.W);
  const Eigen::VectorXd gt =
      adjoint_linear(*op.model,
                     devectorize(Eigen::VectorXd(u1.head(op.n()) - b), op.H, op.W, op.C))
          .values;
  const double sigma = std::sqrt(1.0 / op.inv_sigma2);
  const Eigen::VectorXd noisy =
      op.inv_sigma2 * op.mvec.cwiseProduct(data.y.values) +
      (op.inv_sigma2 * sigma) * op.mvec.cwiseProduct(u2);
  Eigen::VectorXd rhs(op.dim());
  rhs.head(op.n()) = gt + noisy;
  if (op.p() > 0)
    rhs.tail(op.p()) =
        op.trend_v * u1.tail(op.p()) + op.covariates->transpose() * noisy;
  return cg_solve(op.as_op(), rhs, delta, max_iter);
}

Eigen::VectorXd posterior_diag(const PosteriorOperator& op) {
  Eigen::VectorXd diag(op.dim());
  diag.head(op.n()) =
      gram_diagonal(*op.model, op.H, op.W) + op.inv_sigma2 * op.mvec;
  if (op.p() > 0) {
    for (long k = 0; k < op.p(); ++k) {
      const Eigen::VectorXd fk = op.covariates->col(k);
      diag[op.n() + k] = op.trend_v * op.trend_v +
                         op.inv_sigma2 * op.mvec.cwiseProduct(fk).dot(fk);
    }
  }
  return diag;
}

Eigen::VectorXd rbmc_variance(const PosteriorOperator& op,
                              const std::vector<Eigen::VectorXd>& samples,
                              const Eigen::VectorXd& c) {
  if (samples.size() < 2)
    fail(Status::invalid_argument, "rbmc_variance: needs at least 2 samples");
  const Eigen::VectorXd diag = posterior_diag(op);
  const double ns = static_cast<double>(samples.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(op.dim());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(op.dim());
  for (const auto& x : samples) {
    // Per-coordinate conditional mean given the rest.
    const Eigen::VectorXd m = x - (op.matvec(x) - c).cwiseQuotient(diag);
    mean += m;
    sq += m.cwiseProduct(m);
  }
  mean /= ns;
  const Eigen::VectorXd var_cond_mean =
      (sq - ns * mean.cwiseProduct(mean)) / (ns - 1.0);
  return diag.cwiseInverse() + var_cond_mean.cwiseMax(0.0);
}

Eigen::VectorXd mc_variance(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2)
    fail(Status::invalid_argument, "mc_variance: needs at least 2 samples");
  const double ns = static_cast<double>(samples.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(samples[0].size());
  for (const auto& x : samples) mean += x;
  mean /= ns;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(samples[0].size());
  for (const auto& x : samples) acc += (x - mean).cwiseProduct(x - mean);
  return acc / (ns - 1.0);
}

PosteriorSummary summarize(const DgmrfModel& model, const VariationalParams& var,
                           const Dataset& data, const SummarizeConfig& cfg) {
  const int H = data.y.H, W = data.y.W, C = data.y.C;
  const double sigma2 = std::exp(2.0 * model.log_sigma);
  PosteriorSummary out;
  out.cg_delta = cfg.cg_delta;

  if (!model.linear()) {
    out.method = "variational";
    Eigen::VectorXd mean = var.nu;
    if (cfg.trend && var.has_trend() && data.covariates)
      mean += (*data.covariates) * var.nu_beta;
    out.mean = devectorize(mean, H, W, C);
    const Eigen::VectorXd sd = var.s();
    out.marginal_sd = devectorize(sd, H, W, C);
    out.predictive_sd =
        devectorize((sd.array().square() + sigma2).sqrt().matrix(), H, W, C);
    if (cfg.trend && var.has_trend()) {
      out.beta_mean = var.nu_beta;
      out.beta_sd = var.s_beta();
    }
    return out;
  }

  const bool trend = cfg.trend && data.covariates.has_value();
  const PosteriorOperator op = make_posterior_operator(model, data, trend, cfg.trend_v);
  const Eigen::VectorXd c = posterior_mean_rhs(op, data);
  CgResult mean_solve = cg_solve(op.as_op(), c, cfg.cg_delta, cfg.cg_max_iter);
  out.cg_iterations += mean_solve.iterations;

  const int ns = cfg.var_samples;
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(ns);
  for (int s = 0; s < ns; ++s) {
    RngStream rng(mix_seed(cfg.seed, 0x706f7374ULL + s));
    Eigen::VectorXd u1(op.dim()), u2(op.n());
    for (long i = 0; i < u1.size(); ++i) u1[i] = rng.normal();
    for (long i = 0; i < u2.size(); ++i) u2[i] = rng.normal();
    CgResult draw = posterior_sample(op, data, u1, u2, cfg.cg_delta, cfg.cg_max_iter);
    out.cg_iterations += draw.iterations;
    samples.push_back(std::move(draw.x));
  }
  out.samples_used = ns;

  Eigen::VectorXd mean_x = mean_solve.x.head(op.n());
  Eigen::VectorXd variances;
  if (trend) {
    // Variances of the measurement mean x + F beta need joint samples, so
    // plain Monte Carlo is used on t_s = x_s + F beta_s.
    out.method = "cg+mc";
    const Eigen::VectorXd beta_mean = mean_solve.x.tail(op.p());
    std::vector<Eigen::VectorXd> t(samples.size());
    std::vector<Eigen::VectorXd> betas(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
      betas[s] = samples[s].tail(op.p());
      t[s] = samples[s].head(op.n()) + (*data.covariates) * betas[s];
    }
    variances = mc_variance(t);
    out.beta_mean = beta_mean;
    out.beta_sd = mc_variance(betas).cwiseSqrt();
    mean_x += (*data.covariates) * beta_mean;
  } else if (cfg.method == SummarizeConfig::Method::mc) {
    out.method = "cg+mc";
    variances = mc_variance(samples);
  } else {
    out.method = "cg+rbmc";
    variances = rbmc_variance(op, samples, c);
  }

  out.mean = devectorize(mean_x, H, W, C);
  out.marginal_sd = devectorize(variances.cwiseSqrt(), H, W, C);
  out.predictive_sd =
      devectorize((variances.array() + sigma2).sqrt().matrix(), H, W, C);
  return out;
}

}  // namespace dgmrf
