#include "grad.hpp"

#include "error.hpp"

#include <cmath>
#include <numbers>

namespace dgmrf {

namespace {

// Chains a cotangent on the raw taps (a1..a5) into rho space. The pieces for
// p24/p35 (used by the log-determinant) enter through the signed roots with
// sign(0) = 0, which matches the two-sided limit of the determinant term.
Eigen::Matrix<double, 6, 1> chain_plus(const PlusDerived& d, const double g_a[5],
                                       double g_p24, double g_p35) {
  const double sgn24 = d.s24 > 0 ? 1.0 : (d.s24 < 0 ? -1.0 : 0.0);
  const double sgn35 = d.s35 > 0 ? 1.0 : (d.s35 < 0 ? -1.0 : 0.0);
  const double gs24 = g_a[1] * d.em4 + g_a[3] * d.ep4 + g_p24 * sgn24;
  const double gs35 = g_a[2] * d.em6 + g_a[4] * d.ep6 + g_p35 * sgn35;
  Eigen::Matrix<double, 6, 1> g;
  g[0] = g_a[0] * d.sig1 + gs24 * d.sig1 * d.t3 / 2.0;
  g[1] = g_a[0] * d.sig2 + gs35 * d.sig2 * d.t5 / 2.0;
  g[2] = gs24 * d.sp1 * (1.0 - d.t3 * d.t3) / 2.0;
  g[3] = (-g_a[1] * d.a2 + g_a[3] * d.a4) / 2.0;
  g[4] = gs35 * d.sp2 * (1.0 - d.t5 * d.t5) / 2.0;
  g[5] = (-g_a[2] * d.a3 + g_a[4] * d.a5) / 2.0;
  return g;
}

// Flattens a tap-gradient bank into the layer's filter-parameter order.
Eigen::VectorXd chain_filter_grad(const Layer& layer, const FilterBank& tap_grad) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layer.filter_param_count());
  if (g.size() == 0) return g;
  const int R = layer.radius;
  long k = 0;
  if (layer.kind == LayerKind::plus) {
    for (int c = 0; c < layer.channels; ++c) {
      const Filter2D& t = tap_grad.tap(c, c);
      const double g_a[5] = {t(R, R), t(R, R - 1), t(R - 1, R), t(R, R + 1),
                             t(R + 1, R)};
      const PlusDerived d = plus_derived(layer.plus[c].rho);
      g.segment<6>(k) = chain_plus(d, g_a, 0.0, 0.0);
      k += 6;
    }
  } else if (layer.kind == LayerKind::seq) {
    const auto offs = seq_offsets(layer.radius, layer.orientation);
    for (int c = 0; c < layer.channels; ++c) {
      const Filter2D& t = tap_grad.tap(c, c);
      g[k++] = t(R, R) * std::exp(layer.seq[c].eta);  // d a1/d eta = a1
      for (const auto& [dr, dc] : offs) g[k++] = t(R + dr, R + dc);
    }
  }
  const int side = 2 * R + 1;
  int idx = 0;
  for (int i = 1; i < layer.channels; ++i)
    for (int j = 0; j < i; ++j) {
      const Filter2D& t = tap_grad.tap(i, j);
      (void)idx;
      ++idx;
      for (int rr = 0; rr < side; ++rr)
        for (int cc = 0; cc < side; ++cc) g[k++] = t(rr, cc);
    }
  return g;
}

}  // namespace

LayerVjp layer_vjp_at(const Layer& layer, const GridTensor& conv_input,
                      const GridTensor& pre_act, const GridTensor& upstream) {
  if (!upstream.same_shape(pre_act))
    fail(Status::dimension_mismatch, "layer_vjp: cotangent shape mismatch");
  const FilterBank bank = layer.bank();
  LayerVjp out;
  GridTensor u_h = upstream;
  if (layer.prelu) {
    const double a = layer.alpha();
    double ga = 0.0;
    for (long i = 0; i < u_h.values.size(); ++i) {
      const double h = pre_act.values[i];
      if (h < 0.0) {
        ga += upstream.values[i] * a * h;  // d psi/d log_alpha = alpha*h
        u_h.values[i] *= a;
      }
    }
    out.log_alpha_grad = ga;
  }
  out.bias_grad = Eigen::VectorXd::Zero(layer.channels);
  for (int r = 0; r < u_h.H; ++r)
    for (int c = 0; c < u_h.W; ++c)
      for (int ch = 0; ch < u_h.C; ++ch) out.bias_grad[ch] += u_h.at(r, c, ch);
  if (layer.filters_trainable()) {
    const FilterBank tap_grad = conv_tap_gradient(conv_input, u_h, bank);
    out.filter_grad = chain_filter_grad(layer, tap_grad);
  } else {
    out.filter_grad = Eigen::VectorXd();
  }
  out.input_cotangent = rotate_channels(conv_adjoint(u_h, bank), -layer.input_shift);
  return out;
}

LayerVjp layer_vjp(const Layer& layer, const GridTensor& input,
                   const GridTensor& upstream) {
  const GridTensor rotated = rotate_channels(input, layer.input_shift);
  const GridTensor h = conv_same(rotated, layer.bank(), layer.bias);
  return layer_vjp_at(layer, rotated, h, upstream);
}

Eigen::VectorXd logdet_grad(const Layer& layer, int H, int W) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layer.filter_param_count());
  if (g.size() == 0) return g;
  long k = 0;
  if (layer.kind == LayerKind::plus) {
    for (int c = 0; c < layer.channels; ++c) {
      const PlusDerived d = plus_derived(layer.plus[c].rho);
      const PlusLogdetGrad lg = logdet_plus_grad(d.a1, d.p24, d.p35, H, W);
      const double g_a[5] = {lg.d_a1, 0.0, 0.0, 0.0, 0.0};
      g.segment<6>(k) = chain_plus(d, g_a, lg.d_p24, lg.d_p35);
      k += 6;
    }
  } else if (layer.kind == LayerKind::seq) {
    const double n = static_cast<double>(H) * W;
    for (int c = 0; c < layer.channels; ++c) {
      g[k] = n;  // d(n*eta)/d eta; off-center taps contribute nothing
      k += 1 + seq_tap_count(layer.radius);
    }
  }
  return g;  // sub-diagonal blocks never enter the determinant
}

double elbo_omitted_constant(long n, long m_values, long p) {
  return 0.5 * static_cast<double>(n + p) -
         0.5 * static_cast<double>(m_values) * std::log(2.0 * std::numbers::pi);
}

ElboResult elbo_with_grad(const DgmrfModel& model, const VariationalParams& var,
                          const Dataset& data,
                          const std::vector<Eigen::VectorXd>& eps, double trend_v,
                          bool with_grad) {
  const int H = data.y.H, W = data.y.W, C = data.y.C;
  const long n = data.y.size();
  const long p = var.nu_beta.size();
  if (var.nu.size() != n || var.log_s.size() != n)
    fail(Status::dimension_mismatch, "elbo: variational length mismatch");
  if (p > 0) {
    if (!data.covariates || data.covariates->cols() != p)
      fail(Status::dimension_mismatch, "elbo: trend block requires matching covariates");
    if (C != 1) fail(Status::unsupported, "elbo: trend model requires C == 1");
  }
  const long nq = static_cast<long>(eps.size());
  if (nq < 1) fail(Status::invalid_argument, "elbo: needs at least one sample");
  for (const auto& e : eps)
    if (e.size() != n + p)
      fail(Status::dimension_mismatch, "elbo: eps length must be N (+p with trend)");

  const ParamLayout layout = make_layout(model, n, p);
  ElboResult res;
  if (with_grad) res.grad = Eigen::VectorXd::Zero(layout.total);

  const double inv_s2 = std::exp(-2.0 * model.log_sigma);
  const long m_values = data.observed_values();

  // Scalar-entry observation indicator.
  Eigen::VectorXd mvec(n);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < C; ++ch)
        mvec[data.y.index(r, c, ch)] = data.mask.at(r, c) ? 1.0 : 0.0;

  double value = var.log_s.sum() - static_cast<double>(m_values) * model.log_sigma;
  if (p > 0) value += var.log_s_beta.sum() + static_cast<double>(p) * std::log(trend_v);
  for (const Layer& l : model.layers) value += l.logdet(H, W);

  if (with_grad) {
    res.grad.segment(layout.log_s_off, n).array() += 1.0;
    if (layout.sigma_off >= 0) res.grad[layout.sigma_off] -= static_cast<double>(m_values);
    if (p > 0) res.grad.segment(layout.log_s_beta_off, p).array() += 1.0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
      const auto& seg = layout.layers[li];
      if (seg.filter_n > 0)
        res.grad.segment(seg.filter_off, seg.filter_n) +=
            logdet_grad(model.layers[li], H, W);
    }
  }

  const Eigen::VectorXd s = var.s();
  const Eigen::VectorXd s_beta = var.s_beta();
  const double inv_nq = 1.0 / static_cast<double>(nq);

  for (long i = 0; i < nq; ++i) {
    const Eigen::VectorXd eps_x = eps[i].head(n);
    GridTensor x = devectorize(var.nu + s.cwiseProduct(eps_x), H, W, C);
    Eigen::VectorXd beta;
    if (p > 0) beta = var.nu_beta + s_beta.cwiseProduct(eps[i].tail(p));

    const ForwardTrace trace = forward_g(model, x, with_grad);

    Eigen::VectorXd rvec = data.y.values - x.values;
    if (p > 0) rvec -= (*data.covariates) * beta;
    rvec = mvec.cwiseProduct(rvec);
    const double data_term = rvec.squaredNorm();
    const double prior_term = trace.z.values.squaredNorm();
    const double beta_term = p > 0 ? trend_v * trend_v * beta.squaredNorm() : 0.0;

    value -= 0.5 * inv_nq *
             (prior_term + inv_s2 * data_term + beta_term - 2.0 * trace.log_jacobian);

    if (!with_grad) continue;

    // d value / d z_L = -z / nq, then backprop through the layers.
    GridTensor u = trace.z;
    u.values *= -inv_nq;
    for (long li = static_cast<long>(model.layers.size()) - 1; li >= 0; --li) {
      const Layer& layer = model.layers[li];
      const auto& seg = layout.layers[li];
      LayerVjp vjp =
          layer_vjp_at(layer, trace.conv_inputs[li], trace.pre_act[li], u);
      if (seg.filter_off >= 0)
        res.grad.segment(seg.filter_off, seg.filter_n) += vjp.filter_grad;
      if (seg.bias_off >= 0) res.grad.segment(seg.bias_off, seg.bias_n) += vjp.bias_grad;
      if (seg.alpha_off >= 0) {
        double neg = 0.0;
        for (long t = 0; t < trace.pre_act[li].values.size(); ++t)
          if (trace.pre_act[li].values[t] < 0.0) neg += 1.0;
        // Jacobian term log|psi'| = log_alpha on negative pre-activations.
        res.grad[layout.layers[li].alpha_off] += vjp.log_alpha_grad + neg * inv_nq;
      }
      u = std::move(vjp.input_cotangent);
    }

    const Eigen::VectorXd x_cot = u.values + (inv_s2 * inv_nq) * rvec;
    res.grad.segment(layout.nu_off, n) += x_cot;
    res.grad.segment(layout.log_s_off, n) +=
        x_cot.cwiseProduct(s).cwiseProduct(eps_x);
    if (layout.sigma_off >= 0) res.grad[layout.sigma_off] += inv_s2 * data_term * inv_nq;
    if (p > 0) {
      const Eigen::VectorXd beta_cot =
          (inv_s2 * inv_nq) * (data.covariates->transpose() * rvec) -
          (trend_v * trend_v * inv_nq) * beta;
      res.grad.segment(layout.nu_beta_off, p) += beta_cot;
      res.grad.segment(layout.log_s_beta_off, p) +=
          beta_cot.cwiseProduct(s_beta).cwiseProduct(eps[i].tail(p));
    }
  }

  res.value = value;
  return res;
}

}  // namespace dgmrf
