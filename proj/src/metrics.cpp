#include "metrics.hpp"

#include "error.hpp"

#include <cmath>
#include <numbers>

namespace dgmrf {

namespace {
// z such that Phi(z) = 0.975; pins the 95% interval used throughout.
constexpr double kZ975 = 1.959963984540054;

double z_quantile(double alpha) {
  if (alpha == 0.05) return kZ975;
  // Bisection on the cdf covers the general case; alpha in (0, 1).
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(Status::invalid_argument, "interval score: alpha must be in (0, 1)");
  double lo = 0.0, hi = 40.0;
  const double target = 1.0 - alpha / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}
}  // namespace

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double crps_gaussian(double y, double mu, double sd) {
  if (!(sd > 0.0)) fail(Status::invalid_argument, "crps_gaussian: sd must be > 0");
  const double z = (y - mu) / sd;
  return sd * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) -
               1.0 / std::sqrt(std::numbers::pi));
}

double interval_score(double y, double mu, double sd, double alpha) {
  if (!(sd > 0.0)) fail(Status::invalid_argument, "interval_score: sd must be > 0");
  const double zq = z_quantile(alpha);
  const double l = mu - zq * sd, u = mu + zq * sd;
  double score = u - l;
  if (y < l) score += (2.0 / alpha) * (l - y);
  if (y > u) score += (2.0 / alpha) * (y - u);
  return score;
}

bool covered(double y, double mu, double sd, double alpha) {
  return std::abs(y - mu) <= z_quantile(alpha) * sd;
}

ScoreReport score_summary(const GridTensor& truth, const GridTensor& mean,
                          const GridTensor& predictive_sd, const Mask& test,
                          double alpha) {
  if (!truth.same_shape(mean) || !truth.same_shape(predictive_sd) ||
      test.H != truth.H || test.W != truth.W)
    fail(Status::dimension_mismatch, "score_summary: shape mismatch");
  ScoreReport rep;
  double abs_sum = 0.0, sq_sum = 0.0, crps_sum = 0.0, int_sum = 0.0;
  long cov = 0;
  for (int r = 0; r < truth.H; ++r)
    for (int c = 0; c < truth.W; ++c) {
      if (!test.at(r, c)) continue;
      for (int ch = 0; ch < truth.C; ++ch) {
        const double y = truth.at(r, c, ch);
        const double mu = mean.at(r, c, ch);
        const double sd = predictive_sd.at(r, c, ch);
        const double err = y - mu;
        abs_sum += std::abs(err);
        sq_sum += err * err;
        crps_sum += crps_gaussian(y, mu, sd);
        int_sum += interval_score(y, mu, sd, alpha);
        cov += covered(y, mu, sd, alpha) ? 1 : 0;
        ++rep.n_scored;
      }
    }
  if (rep.n_scored == 0)
    fail(Status::invalid_argument, "score_summary: empty test set");
  const double n = static_cast<double>(rep.n_scored);
  rep.mae = abs_sum / n;
  rep.rmse = std::sqrt(sq_sum / n);
  rep.crps = crps_sum / n;
  rep.interval = int_sum / n;
  rep.coverage = static_cast<double>(cov) / n;
  return rep;
}

std::pair<double, double> point_scores(const GridTensor& truth, const GridTensor& mean,
                                       const Mask& test) {
  if (!truth.same_shape(mean) || test.H != truth.H || test.W != truth.W)
    fail(Status::dimension_mismatch, "point_scores: shape mismatch");
  double abs_sum = 0.0, sq_sum = 0.0;
  long n = 0;
  for (int r = 0; r < truth.H; ++r)
    for (int c = 0; c < truth.W; ++c) {
      if (!test.at(r, c)) continue;
      for (int ch = 0; ch < truth.C; ++ch) {
        const double err = truth.at(r, c, ch) - mean.at(r, c, ch);
        abs_sum += std::abs(err);
        sq_sum += err * err;
        ++n;
      }
    }
  if (n == 0) fail(Status::invalid_argument, "point_scores: empty test set");
  return {abs_sum / static_cast<double>(n), std::sqrt(sq_sum / static_cast<double>(n))};
}

double coverage(const GridTensor& truth, const GridTensor& mean,
                const GridTensor& predictive_sd, const Mask& test, double alpha) {
  long n = 0, cov = 0;
  for (int r = 0; r < truth.H; ++r)
    for (int c = 0; c < truth.W; ++c) {
      if (!test.at(r, c)) continue;
      for (int ch = 0; ch < truth.C; ++ch) {
        cov += covered(truth.at(r, c, ch), mean.at(r, c, ch),
                       predictive_sd.at(r, c, ch), alpha)
                   ? 1
                   : 0;
        ++n;
      }
    }
  if (n == 0) fail(Status::invalid_argument, "coverage: empty test set");
  return static_cast<double>(cov) / static_cast<double>(n);
}

}  // namespace dgmrf
