#include "posterior.hpp"

#include "error.hpp"
#include "oracles.hpp"
#include "util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace dgmrf;

namespace {

Dataset masked_data(std::uint64_t seed, int H, int W, double miss) {
  Dataset d;
  d.y = oracle::random_grid(seed, H, W, 1);
  d.mask = Mask(H, W, 1);
  RngStream rng(seed + 1);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (rng.uniform() < miss) {
        d.mask.set(r, c, 0);
        d.y.at(r, c, 0) = 0.0;
      }
  return d;
}

DgmrfModel identity_model(double sigma) {
  DgmrfModel m;
  m.channels = 1;
  m.layers.push_back(make_identity_layer(1));
  m.log_sigma = std::log(sigma);
  return m;
}

Dataset with_trend(Dataset d, std::uint64_t seed) {
  Eigen::MatrixXd f(static_cast<long>(d.y.H) * d.y.W, 3);
  RngStream rng(seed);
  for (long i = 0; i < f.rows(); ++i) {
    f(i, 0) = 1.0;
    f(i, 1) = rng.normal();
    f(i, 2) = rng.normal();
  }
  d.covariates = f;
  return d;
}

}  // namespace

TEST_CASE("qtilde_matvec") {
  SUBCASE("identity model, full mask, sigma = 1 doubles the input") {
    const DgmrfModel m = identity_model(1.0);
    Dataset d;
    d.y = GridTensor(3, 3, 1);
    d.mask = Mask(3, 3, 1);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const Eigen::VectorXd u = oracle::random_grid(5, 3, 3, 1).values;
    CHECK((op.matvec(u) - 2.0 * u).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SUBCASE("random model on 5x5 matches the dense precision") {
    ModelSpec spec;
    spec.kind = LayerKind::seq;
    spec.layers = 2;
    spec.seed = 7;
    spec.init_sd = 0.5;
    spec.sigma = 0.4;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(8, 5, 5, 0.5);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const auto dense = oracle::dense_posterior(m, d);
    const Eigen::VectorXd u = oracle::random_grid(9, 5, 5, 1).values;
    const Eigen::VectorXd expect = dense.prec * u;
    CHECK((op.matvec(u) - expect).lpNorm<Eigen::Infinity>() <=
          1e-10 * expect.lpNorm<Eigen::Infinity>());
  }
  SUBCASE("trend variant on 4x4 with p = 3 matches the dense block matrix") {
    ModelSpec spec;
    spec.seed = 17;
    spec.init_sd = 0.4;
    spec.sigma = 0.5;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = with_trend(masked_data(18, 4, 4, 0.4), 19);
    const PosteriorOperator op = make_posterior_operator(m, d, true, 1e-2);
    const auto dense = oracle::dense_posterior(m, d, true, 1e-2);
    RngStream rng(20);
    Eigen::VectorXd u(19);
    for (int i = 0; i < 19; ++i) u[i] = rng.normal();
    const Eigen::VectorXd expect = dense.prec * u;
    CHECK((op.matvec(u) - expect).lpNorm<Eigen::Infinity>() <=
          1e-10 * expect.lpNorm<Eigen::Infinity>());
  }
  SUBCASE("symmetry and positive definiteness") {
    ModelSpec spec;
    spec.kind = LayerKind::plus;
    spec.layers = 2;
    spec.seed = 27;
    spec.init_sd = 0.5;
    spec.sigma = 0.6;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(28, 4, 5, 0.5);
    const PosteriorOperator op = make_posterior_operator(m, d);
    RngStream rng(29);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd u(20), v(20);
      for (int i = 0; i < 20; ++i) {
        u[i] = rng.normal();
        v[i] = rng.normal();
      }
      const double uv = op.matvec(u).dot(v);
      const double vu = u.dot(op.matvec(v));
      CHECK(std::abs(uv - vu) <= 1e-10 * std::max(1.0, std::abs(uv)));
      CHECK(u.dot(op.matvec(u)) > 0.0);
    }
  }
}

TEST_CASE("cg_solve") {
  SUBCASE("identity operator converges in one iteration") {
    const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(6, 1, 6);
    const CgResult r = cg_solve([](const Eigen::VectorXd& u) { return u; }, c, 1e-7);
    CHECK(r.iterations == 1);
    CHECK((r.x - c).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("diagonal operator has the closed-form solution") {
    const int n = 12;
    Eigen::VectorXd diag = Eigen::VectorXd::LinSpaced(n, 1, n);
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(n);
    const CgResult r = cg_solve(
        [&](const Eigen::VectorXd& u) { return diag.cwiseProduct(u).eval(); }, c,
        1e-10);
    for (int i = 0; i < n; ++i) CHECK(r.x[i] == doctest::Approx(1.0 / diag[i]));
  }
  SUBCASE("random SPD 30x30 system matches the dense solve") {
    RngStream rng(33);
    Eigen::MatrixXd a(30, 30);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j) a(i, j) = rng.normal();
    const Eigen::MatrixXd spd =
        a * a.transpose() + 30.0 * Eigen::MatrixXd::Identity(30, 30);
    Eigen::VectorXd c(30);
    for (int i = 0; i < 30; ++i) c[i] = rng.normal();
    const CgResult r = cg_solve(
        [&](const Eigen::VectorXd& u) { return (spd * u).eval(); }, c, 1e-12);
    const Eigen::VectorXd expect = spd.llt().solve(c);
    CHECK((r.x - expect).lpNorm<Eigen::Infinity>() <=
          1e-6 * expect.lpNorm<Eigen::Infinity>());
  }
  SUBCASE("iteration cap exceeded raises a convergence error") {
    Eigen::VectorXd diag(8);
    diag << 1e-8, 1, 2, 3, 4, 5, 6, 1e8;
    CHECK_THROWS_AS(
        cg_solve([&](const Eigen::VectorXd& u) { return diag.cwiseProduct(u).eval(); },
                 Eigen::VectorXd::Ones(8), 1e-16, 3),
        Error);
  }
  SUBCASE("zero right-hand side returns zero immediately") {
    const CgResult r = cg_solve([](const Eigen::VectorXd& u) { return u; },
                                Eigen::VectorXd::Zero(4), 1e-7);
    CHECK(r.iterations == 0);
    CHECK(r.x.isZero());
  }
}

TEST_CASE("posterior_mean") {
  SUBCASE("identity model, b = 0, full mask: per-pixel scalar algebra") {
    const double sigma = 0.8;
    const DgmrfModel m = identity_model(sigma);
    Dataset d;
    d.y = oracle::random_grid(41, 3, 4, 1);
    d.mask = Mask(3, 4, 1);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const CgResult r = posterior_mean(op, d, 1e-12);
    const double inv_s2 = 1.0 / (sigma * sigma);
    const Eigen::VectorXd expect = (inv_s2 / (1.0 + inv_s2)) * d.y.values;
    CHECK((r.x - expect).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  SUBCASE("1x1 problem: mu = (y/sigma^2 - g b) / (g^2 + 1/sigma^2)") {
    const double g = 1.7, bias = 0.4, sigma = 0.6, y = 2.0;
    DgmrfModel m;
    m.channels = 1;
    m.layers.push_back(make_fixed_plus_layer(g, 0.0, 0.0, 0.0, 0.0));
    m.layers[0].bias[0] = bias;
    m.log_sigma = std::log(sigma);
    Dataset d;
    d.y = GridTensor(1, 1, 1);
    d.y.values[0] = y;
    d.mask = Mask(1, 1, 1);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const CgResult r = posterior_mean(op, d, 1e-12);
    const double expect =
        (y / (sigma * sigma) - g * bias) / (g * g + 1.0 / (sigma * sigma));
    CHECK(r.x[0] == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("6x6 Matern model with half the pixels missing matches dense") {
    DgmrfModel m = matern_layers(8.0 / 2500.0, 1.0, 1, 1);
    m.log_sigma = std::log(0.3);
    const Dataset d = masked_data(51, 6, 6, 0.5);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const CgResult r = posterior_mean(op, d, 1e-12);
    const auto dense = oracle::dense_posterior(m, d);
    CHECK((r.x - dense.mean).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("posterior_sample") {
  ModelSpec spec;
  spec.seed = 61;
  spec.init_sd = 0.4;
  spec.sigma = 0.5;
  const DgmrfModel m = random_init_model(spec);  // biases are zero
  const Dataset d = masked_data(62, 4, 4, 0.4);
  const PosteriorOperator op = make_posterior_operator(m, d);
  const auto dense = oracle::dense_posterior(m, d);

  SUBCASE("noise-free perturbation reduces to the mean equation") {
    const Eigen::VectorXd b = model_bias(m, 4, 4);  // zero for this model
    REQUIRE(b.isZero());
    const CgResult s = posterior_sample(op, d, b, Eigen::VectorXd::Zero(16), 1e-12);
    const CgResult mean = posterior_mean(op, d, 1e-12);
    CHECK((s.x - mean.x).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  SUBCASE("sample mean and covariance match the dense posterior") {
    const int ns = 4000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(16);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(16, 16);
    for (int sidx = 0; sidx < ns; ++sidx) {
      RngStream rng(mix_seed(1234, sidx));
      Eigen::VectorXd u1(16), u2(16);
      for (int i = 0; i < 16; ++i) u1[i] = rng.normal();
      for (int i = 0; i < 16; ++i) u2[i] = rng.normal();
      const CgResult s = posterior_sample(op, d, u1, u2, 1e-10);
      mean += s.x;
      second += s.x * s.x.transpose();
    }
    mean /= ns;
    const Eigen::MatrixXd cov =
        (second - ns * mean * mean.transpose()) / (ns - 1.0);
    for (int i = 0; i < 16; ++i) {
      const double se = std::sqrt(dense.cov(i, i) / ns);
      CHECK(std::abs(mean[i] - dense.mean[i]) <= 5.0 * se);
      for (int j = 0; j < 16; ++j) {
        const double cse = std::sqrt(
            (dense.cov(i, i) * dense.cov(j, j) + dense.cov(i, j) * dense.cov(i, j)) /
            (ns - 1.0));
        CHECK(std::abs(cov(i, j) - dense.cov(i, j)) <= 5.0 * cse);
      }
    }
  }
}

TEST_CASE("rbmc_variance") {
  SUBCASE("diagonal posterior: estimator equals 1/diag exactly") {
    const DgmrfModel m = identity_model(0.7);
    Dataset d = masked_data(71, 3, 3, 0.4);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const Eigen::VectorXd c = posterior_mean_rhs(op, d);
    std::vector<Eigen::VectorXd> samples;
    RngStream rng(72);
    for (int s = 0; s < 20; ++s) {
      Eigen::VectorXd x(9);
      for (int i = 0; i < 9; ++i) x[i] = rng.normal();
      samples.push_back(x);
    }
    const Eigen::VectorXd v = rbmc_variance(op, samples, c);
    const Eigen::VectorXd expect = posterior_diag(op).cwiseInverse();
    CHECK((v - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("repeated single sample returns 1/diag") {
    ModelSpec spec;
    spec.seed = 81;
    spec.init_sd = 0.4;
    spec.sigma = 0.5;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(82, 4, 4, 0.4);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const Eigen::VectorXd c = posterior_mean_rhs(op, d);
    RngStream rng(83);
    Eigen::VectorXd u1(16), u2(16);
    for (int i = 0; i < 16; ++i) u1[i] = rng.normal();
    for (int i = 0; i < 16; ++i) u2[i] = rng.normal();
    const Eigen::VectorXd x = posterior_sample(op, d, u1, u2, 1e-10).x;
    const Eigen::VectorXd v = rbmc_variance(op, {x, x}, c);
    CHECK((v - posterior_diag(op).cwiseInverse()).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("fewer than two samples is an error") {
    const DgmrfModel m = identity_model(1.0);
    Dataset d = masked_data(91, 2, 2, 0.0);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const Eigen::VectorXd c = posterior_mean_rhs(op, d);
    CHECK_THROWS_AS(rbmc_variance(op, {Eigen::VectorXd::Zero(4)}, c), Error);
  }
  SUBCASE("matches dense marginal variances and beats naive Monte Carlo") {
    ModelSpec spec;
    spec.kind = LayerKind::plus;
    spec.seed = 101;
    spec.init_sd = 0.5;
    spec.sigma = 0.6;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(102, 4, 4, 0.5);
    const PosteriorOperator op = make_posterior_operator(m, d);
    const Eigen::VectorXd c = posterior_mean_rhs(op, d);
    const auto dense = oracle::dense_posterior(m, d);
    const Eigen::VectorXd diag_inv = posterior_diag(op).cwiseInverse();

    auto draw = [&](std::uint64_t seed, int ns) {
      std::vector<Eigen::VectorXd> out;
      for (int s = 0; s < ns; ++s) {
        RngStream rng(mix_seed(seed, s));
        Eigen::VectorXd u1(16), u2(16);
        for (int i = 0; i < 16; ++i) u1[i] = rng.normal();
        for (int i = 0; i < 16; ++i) u2[i] = rng.normal();
        out.push_back(posterior_sample(op, d, u1, u2, 1e-10).x);
      }
      return out;
    };

    const int ns = 2000;
    const auto samples = draw(55, ns);
    const Eigen::VectorXd v = rbmc_variance(op, samples, c);
    for (int i = 0; i < 16; ++i) {
      const double cond_var = dense.cov(i, i) - 1.0 / posterior_diag(op)[i];
      const double se = std::max(cond_var, 0.0) * std::sqrt(2.0 / (ns - 1.0)) + 1e-12;
      CHECK(std::abs(v[i] - dense.cov(i, i)) <= 5.0 * se);
    }

    // Rao-Blackwellization: smaller spread than naive MC across repeated
    // trials at the same sample budget.
    const int trials = 20, per_trial = 60;
    Eigen::MatrixXd rb(trials, 16), mc(trials, 16);
    for (int t = 0; t < trials; ++t) {
      const auto s = draw(700 + t, per_trial);
      rb.row(t) = rbmc_variance(op, s, c).transpose();
      mc.row(t) = mc_variance(s).transpose();
    }
    double rb_var = 0.0, mc_var = 0.0;
    for (int i = 0; i < 16; ++i) {
      const auto col_var = [&](const Eigen::MatrixXd& m2) {
        const double mu = m2.col(i).mean();
        return (m2.col(i).array() - mu).square().sum() / (trials - 1.0);
      };
      rb_var += col_var(rb);
      mc_var += col_var(mc);
    }
    CHECK(rb_var < mc_var);
    (void)diag_inv;
  }
}

TEST_CASE("mc_variance") {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(3, 2.5);
  SUBCASE("identical samples give zero") {
    CHECK(mc_variance({a, a, a}).isZero());
  }
  SUBCASE("{-1, +1} per coordinate gives 2 (n-1 denominator)") {
    const Eigen::VectorXd p = Eigen::VectorXd::Ones(3);
    CHECK(mc_variance({p, -p}).isApproxToConstant(2.0));
  }
  SUBCASE("standard normal draws have unit variance") {
    RngStream rng(5);
    std::vector<Eigen::VectorXd> samples;
    const int ns = 10000;
    for (int s = 0; s < ns; ++s) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = rng.normal();
      samples.push_back(x);
    }
    const Eigen::VectorXd v = mc_variance(samples);
    const double se = std::sqrt(2.0 / (ns - 1.0));
    for (int i = 0; i < 4; ++i) CHECK(std::abs(v[i] - 1.0) <= 4.0 * se);
  }
  SUBCASE("fewer than two samples is an error") {
    CHECK_THROWS_AS(mc_variance({a}), Error);
  }
}

TEST_CASE("fully observed data with sigma -> 0 pins the mean to y") {
  DgmrfModel m = matern_layers(0.1, 1.0, 1, 1);
  m.log_sigma = std::log(1e-3);
  Dataset d;
  d.y = oracle::random_grid(111, 5, 5, 1);
  d.mask = Mask(5, 5, 1);
  const PosteriorOperator op = make_posterior_operator(m, d);
  const CgResult r = posterior_mean(op, d, 1e-10, 4000);
  for (long i = 0; i < 25; ++i)
    CHECK(std::abs(r.x[i] - d.y.values[i]) <=
          1e-2 * std::max(1.0, std::abs(d.y.values[i])));
}

TEST_CASE("summarize") {
  SUBCASE("linear model matches the dense posterior") {
    ModelSpec spec;
    spec.seed = 121;
    spec.init_sd = 0.4;
    spec.sigma = 0.5;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(122, 6, 6, 0.4);
    VariationalParams var = init_variational(d, 0);
    SummarizeConfig cfg;
    cfg.cg_delta = 1e-10;
    cfg.var_samples = 4000;
    cfg.seed = 9;
    const PosteriorSummary sum = summarize(m, var, d, cfg);
    CHECK(sum.method == "cg+rbmc");
    const auto dense = oracle::dense_posterior(m, d);
    CHECK((sum.mean.values - dense.mean).lpNorm<Eigen::Infinity>() < 1e-6);
    const PosteriorOperator op = make_posterior_operator(m, d);
    for (int i = 0; i < 36; ++i) {
      const double cond_var = dense.cov(i, i) - 1.0 / posterior_diag(op)[i];
      const double se =
          std::max(cond_var, 0.0) * std::sqrt(2.0 / (cfg.var_samples - 1.0)) + 1e-12;
      const double got_var = sum.marginal_sd.values[i] * sum.marginal_sd.values[i];
      CHECK(std::abs(got_var - dense.cov(i, i)) <= 6.0 * se);
      // Predictive variance adds sigma^2 under the root.
      const double pv = sum.predictive_sd.values[i] * sum.predictive_sd.values[i];
      CHECK(pv == doctest::Approx(got_var + 0.25).epsilon(1e-9));
    }
  }
  SUBCASE("non-linear model summary is the variational fit verbatim") {
    ModelSpec spec;
    spec.prelu = true;
    spec.seed = 131;
    spec.sigma = 0.4;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = masked_data(132, 4, 4, 0.3);
    VariationalParams var = init_variational(d, 0);
    RngStream rng(133);
    for (long i = 0; i < var.log_s.size(); ++i) var.log_s[i] = 0.3 * rng.normal();
    SummarizeConfig cfg;
    const PosteriorSummary sum = summarize(m, var, d, cfg);
    CHECK(sum.method == "variational");
    CHECK(sum.mean.values == var.nu);
    CHECK(sum.marginal_sd.values == Eigen::VectorXd(var.log_s.array().exp()));
    const double s2 = 0.16;
    for (long i = 0; i < 16; ++i)
      CHECK(sum.predictive_sd.values[i] ==
            doctest::Approx(std::sqrt(sum.marginal_sd.values[i] *
                                          sum.marginal_sd.values[i] +
                                      s2)));
  }
  SUBCASE("trend model: CG mean matches the dense extended system, MC variances") {
    ModelSpec spec;
    spec.seed = 141;
    spec.init_sd = 0.4;
    spec.sigma = 0.5;
    const DgmrfModel m = random_init_model(spec);
    const Dataset d = with_trend(masked_data(142, 4, 4, 0.4), 143);
    VariationalParams var = init_variational(d, 3);
    SummarizeConfig cfg;
    cfg.trend = true;
    cfg.trend_v = 1e-2;
    cfg.cg_delta = 1e-11;
    cfg.var_samples = 3000;
    const PosteriorSummary sum = summarize(m, var, d, cfg);
    CHECK(sum.method == "cg+mc");
    const auto dense = oracle::dense_posterior(m, d, true, 1e-2);
    // Measurement-scale mean: x-part + F * beta-part.
    const Eigen::VectorXd expect_mean =
        dense.mean.head(16) + (*d.covariates) * dense.mean.tail(3);
    CHECK((sum.mean.values - expect_mean).lpNorm<Eigen::Infinity>() < 1e-6);
    REQUIRE(sum.beta_mean.size() == 3);
    for (int k = 0; k < 3; ++k)
      CHECK(sum.beta_mean[k] == doctest::Approx(dense.mean[16 + k]).epsilon(1e-6));
    // Variance of t = x + F beta from the dense joint covariance.
    const Eigen::MatrixXd proj =
        (Eigen::MatrixXd(16, 19) << Eigen::MatrixXd::Identity(16, 16),
         *d.covariates)
            .finished();
    const Eigen::MatrixXd tcov = proj * dense.cov * proj.transpose();
    for (int i = 0; i < 16; ++i) {
      const double got = sum.marginal_sd.values[i] * sum.marginal_sd.values[i];
      const double se = tcov(i, i) * std::sqrt(2.0 / (cfg.var_samples - 1.0));
      CHECK(std::abs(got - tcov(i, i)) <= 5.0 * se);
    }
  }
  SUBCASE("predictive sd grows with sigma for the identity model") {
    Dataset d = masked_data(151, 4, 4, 0.3);
    VariationalParams var = init_variational(d, 0);
    SummarizeConfig cfg;
    cfg.var_samples = 50;
    const PosteriorSummary small = summarize(identity_model(0.1), var, d, cfg);
    const PosteriorSummary large = summarize(identity_model(2.0), var, d, cfg);
    CHECK(large.predictive_sd.values.mean() > small.predictive_sd.values.mean());
  }
}
