#include "oracles.hpp"

#include "util.hpp"

#include <cmath>
#include <numbers>

namespace oracle {

using dgmrf::Dataset;
using dgmrf::DgmrfModel;
using dgmrf::GridTensor;

Eigen::MatrixXd dense_g(const DgmrfModel& model, int H, int W) {
  return dgmrf::assemble_dense(
      [&](const GridTensor& t) { return dgmrf::forward_linear(model, t); }, H, W,
      model.channels);
}

double dense_logabsdet(const Eigen::MatrixXd& m) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  double sum = 0.0;
  for (long i = 0; i < m.rows(); ++i) sum += std::log(std::abs(lu.matrixLU()(i, i)));
  return sum;
}

namespace {

// Observation indicator per scalar entry plus trend-extended blocks.
Eigen::VectorXd mask_vector(const Dataset& data) {
  const auto& y = data.y;
  Eigen::VectorXd m(y.size());
  for (int r = 0; r < y.H; ++r)
    for (int c = 0; c < y.W; ++c)
      for (int ch = 0; ch < y.C; ++ch)
        m[y.index(r, c, ch)] = data.mask.at(r, c) ? 1.0 : 0.0;
  return m;
}

}  // namespace

DensePosterior dense_posterior(const DgmrfModel& model, const Dataset& data,
                               bool trend, double trend_v) {
  const int H = data.y.H, W = data.y.W;
  const long n = data.y.size();
  const Eigen::MatrixXd g = dense_g(model, H, W);
  const Eigen::VectorXd b = dgmrf::model_bias(model, H, W);
  const Eigen::VectorXd mv = mask_vector(data);
  const double inv_s2 = std::exp(-2.0 * model.log_sigma);
  const long p = trend ? data.covariates->cols() : 0;

  Eigen::MatrixXd prec(n + p, n + p);
  Eigen::VectorXd rhs(n + p);
  prec.topLeftCorner(n, n) =
      g.transpose() * g + inv_s2 * Eigen::MatrixXd(mv.asDiagonal());
  rhs.head(n) = -g.transpose() * b + inv_s2 * mv.cwiseProduct(data.y.values);
  if (p > 0) {
    const Eigen::MatrixXd& f = *data.covariates;
    const Eigen::MatrixXd mf = mv.asDiagonal() * f;
    prec.topRightCorner(n, p) = inv_s2 * mf;
    prec.bottomLeftCorner(p, n) = inv_s2 * mf.transpose();
    prec.bottomRightCorner(p, p) =
        trend_v * trend_v * Eigen::MatrixXd::Identity(p, p) +
        inv_s2 * f.transpose() * mf;
    rhs.tail(p) = inv_s2 * f.transpose() * mv.cwiseProduct(data.y.values);
  }
  DensePosterior out;
  out.prec = prec;
  out.cov = prec.inverse();
  out.mean = out.cov * rhs;
  return out;
}

double dense_log_marginal(const DgmrfModel& model, const Dataset& data, bool trend,
                          double trend_v) {
  const int H = data.y.H, W = data.y.W;
  const long n = data.y.size();
  const Eigen::MatrixXd g = dense_g(model, H, W);
  const Eigen::VectorXd b = dgmrf::model_bias(model, H, W);
  const Eigen::MatrixXd prior_cov = (g.transpose() * g).inverse();
  const Eigen::VectorXd prior_mean = -g.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd mv = mask_vector(data);
  const double sigma2 = std::exp(2.0 * model.log_sigma);

  std::vector<long> obs;
  for (long i = 0; i < n; ++i)
    if (mv[i] > 0.5) obs.push_back(i);
  const long m = static_cast<long>(obs.size());

  Eigen::VectorXd mu(m);
  Eigen::MatrixXd cov(m, m);
  for (long a = 0; a < m; ++a) {
    mu[a] = prior_mean[obs[a]];
    for (long bb = 0; bb < m; ++bb) cov(a, bb) = prior_cov(obs[a], obs[bb]);
  }
  cov += sigma2 * Eigen::MatrixXd::Identity(m, m);
  if (trend) {
    Eigen::MatrixXd fo(m, data.covariates->cols());
    for (long a = 0; a < m; ++a) fo.row(a) = data.covariates->row(obs[a]);
    cov += fo * fo.transpose() / (trend_v * trend_v);
  }
  Eigen::VectorXd r(m);
  for (long a = 0; a < m; ++a) r[a] = data.y.values[obs[a]] - mu[a];
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double logdet = 0.0;
  for (long a = 0; a < m; ++a) logdet += 2.0 * std::log(llt.matrixL()(a, a));
  const double quad = r.dot(llt.solve(r));
  return -0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi) -
         0.5 * logdet - 0.5 * quad;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (long i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    xp[i] = x0 + step;
    const double fp = f(xp);
    xp[i] = x0 - step;
    const double fm = f(xp);
    xp[i] = x0;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double norm_quantile(double p) {
  // Beasley-Springer-Moro style central approximation with Acklam tail
  // coefficients, accurate to ~1e-15 over (0, 1).
  if (!(p > 0.0 && p < 1.0)) return std::nan("");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // One Halley refinement pushes the rational approximation to full
  // double precision.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

dgmrf::GridTensor random_grid(std::uint64_t seed, int H, int W, int C) {
  dgmrf::RngStream rng(seed);
  dgmrf::GridTensor t(H, W, C);
  for (long i = 0; i < t.values.size(); ++i) t.values[i] = rng.normal();
  return t;
}

void randomize_biases(dgmrf::DgmrfModel& model, std::uint64_t seed, double sd) {
  dgmrf::RngStream rng(seed);
  for (auto& layer : model.layers) {
    if (!layer.bias_trainable) continue;
    for (long c = 0; c < layer.bias.size(); ++c) layer.bias[c] = sd * rng.normal();
    if (layer.prelu) layer.log_alpha = sd * rng.normal();
  }
}

}  // namespace oracle
