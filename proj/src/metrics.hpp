#pragma once

#include "grid.hpp"

#include <vector>

namespace dgmrf {

// Standard normal cdf / pdf.
double norm_cdf(double z);
double norm_pdf(double z);

struct ScoreReport {
  double mae = 0.0;
  double rmse = 0.0;
  double crps = 0.0;
  double interval = 0.0;
  double coverage = 0.0;
  long n_scored = 0;
};

// Closed-form CRPS of a Gaussian predictive N(mu, sd^2) at truth y:
//   sd * [ z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi) ],  z = (y - mu)/sd.
double crps_gaussian(double y, double mu, double sd);

// Interval score of the central (1-alpha) Gaussian interval [l, u]:
//   (u - l) + (2/alpha)(l - y) 1{y < l} + (2/alpha)(y - u) 1{y > u}.
double interval_score(double y, double mu, double sd, double alpha = 0.05);

// 1 when |y - mu| <= z_{1-alpha/2} * sd (interval membership).
bool covered(double y, double mu, double sd, double alpha = 0.05);

// All five scores over the scalar entries of test-masked pixels.
// test(r, c) selects pixels; every channel of a selected pixel is scored.
ScoreReport score_summary(const GridTensor& truth, const GridTensor& mean,
                          const GridTensor& predictive_sd, const Mask& test,
                          double alpha = 0.05);

// (MAE, RMSE) only; the uncertainty-free subset of the report.
std::pair<double, double> point_scores(const GridTensor& truth, const GridTensor& mean,
                                       const Mask& test);

// Fraction of test entries inside the central (1-alpha) interval.
double coverage(const GridTensor& truth, const GridTensor& mean,
                const GridTensor& predictive_sd, const Mask& test, double alpha = 0.05);

}  // namespace dgmrf
