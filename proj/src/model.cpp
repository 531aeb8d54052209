#include "model.hpp"

#include "error.hpp"
#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dgmrf {

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  // inverse of softplus for y > 0
  return std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PlusDerived plus_derived(const Eigen::Matrix<double, 6, 1>& rho) {
  PlusDerived d;
  d.sp1 = softplus(rho[0]);
  d.sp2 = softplus(rho[1]);
  d.sig1 = sigmoid(rho[0]);
  d.sig2 = sigmoid(rho[1]);
  d.t3 = std::tanh(rho[2]);
  d.t5 = std::tanh(rho[4]);
  d.s24 = d.sp1 * d.t3 / 2.0;
  d.s35 = d.sp2 * d.t5 / 2.0;
  d.em4 = std::exp(-rho[3] / 2.0);
  d.ep4 = std::exp(rho[3] / 2.0);
  d.em6 = std::exp(-rho[5] / 2.0);
  d.ep6 = std::exp(rho[5] / 2.0);
  d.a1 = d.sp1 + d.sp2;
  d.a2 = d.s24 * d.em4;
  d.a4 = d.s24 * d.ep4;
  d.a3 = d.s35 * d.em6;
  d.a5 = d.s35 * d.ep6;
  d.p24 = std::abs(d.s24);
  d.p35 = std::abs(d.s35);
  return d;
}

std::vector<std::pair<int, int>> seq_offsets(int radius, int orientation) {
  if (radius < 1 || radius > 3)
    fail(Status::invalid_argument, "seq filter radius must be 1, 2 or 3");
  if (orientation < 0 || orientation > 7)
    fail(Status::invalid_argument, "seq orientation must be in 0..7");
  // Canonical mask: positions strictly after the center in raster order.
  std::vector<std::pair<int, int>> base;
  for (int dc = 1; dc <= radius; ++dc) base.emplace_back(0, dc);
  for (int dr = 1; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc) base.emplace_back(dr, dc);
  std::vector<std::pair<int, int>> out;
  out.reserve(base.size());
  for (auto [dr, dc] : base) {
    int tr = 0, tc = 0;
    switch (orientation) {
      case 0: tr = dr; tc = dc; break;
      case 1: tr = -dc; tc = dr; break;
      case 2: tr = -dr; tc = -dc; break;
      case 3: tr = dc; tc = -dr; break;
      case 4: tr = dr; tc = -dc; break;
      case 5: tr = -dr; tc = dc; break;
      case 6: tr = dc; tc = dr; break;
      case 7: tr = -dc; tc = -dr; break;
    }
    out.emplace_back(tr, tc);
  }
  return out;
}

double Layer::alpha() const { return std::exp(log_alpha); }

int Layer::filter_param_count() const {
  if (!filters_trainable()) return 0;
  const int side = 2 * radius + 1;
  int n = sub_block_count() * side * side;
  if (kind == LayerKind::plus) n += 6 * channels;
  if (kind == LayerKind::seq) n += (1 + seq_tap_count(radius)) * channels;
  return n;
}

FilterBank Layer::bank() const {
  FilterBank b(channels, channels, radius);
  const int side = 2 * radius + 1;
  for (int c = 0; c < channels; ++c) {
    Filter2D f = Filter2D::Zero(side, side);
    switch (kind) {
      case LayerKind::plus: {
        const PlusDerived d = plus_derived(plus[c].rho);
        f(radius, radius) = d.a1;
        f(radius - 1, radius) = d.a3;
        f(radius, radius - 1) = d.a2;
        f(radius, radius + 1) = d.a4;
        f(radius + 1, radius) = d.a5;
        break;
      }
      case LayerKind::plus_fixed: {
        const Eigen::VectorXd& a = fixed_taps[c];
        f(radius, radius) = a[0];
        f(radius, radius - 1) = a[1];
        f(radius - 1, radius) = a[2];
        f(radius, radius + 1) = a[3];
        f(radius + 1, radius) = a[4];
        break;
      }
      case LayerKind::seq: {
        f(radius, radius) = std::exp(seq[c].eta);
        const auto offs = seq_offsets(radius, orientation);
        for (std::size_t k = 0; k < offs.size(); ++k)
          f(radius + offs[k].first, radius + offs[k].second) = seq[c].off[k];
        break;
      }
    }
    b.tap(c, c) = std::move(f);
  }
  int idx = 0;
  for (int i = 1; i < channels; ++i)
    for (int j = 0; j < i; ++j) b.tap(i, j) = sub[idx++];
  return b;
}

double logdet_plus(double a1, double p24, double p35, int H, int W) {
  std::vector<double> ci(H), cj(W);
  for (int i = 0; i < H; ++i) ci[i] = std::cos(std::numbers::pi * (i + 1) / (H + 1));
  for (int j = 0; j < W; ++j) cj[j] = std::cos(std::numbers::pi * (j + 1) / (W + 1));
  double sum = 0.0;
  for (int i = 0; i < H; ++i) {
    const double base = a1 + 2.0 * p35 * ci[i];
    for (int j = 0; j < W; ++j) {
      const double lam = base + 2.0 * p24 * cj[j];
      if (!(lam > 0.0))
        fail(Status::non_finite, "logdet_plus: nonpositive eigenvalue");
      sum += std::log(lam);
    }
  }
  return sum;
}

PlusLogdetGrad logdet_plus_grad(double a1, double p24, double p35, int H, int W) {
  std::vector<double> ci(H), cj(W);
  for (int i = 0; i < H; ++i) ci[i] = std::cos(std::numbers::pi * (i + 1) / (H + 1));
  for (int j = 0; j < W; ++j) cj[j] = std::cos(std::numbers::pi * (j + 1) / (W + 1));
  PlusLogdetGrad g;
  for (int i = 0; i < H; ++i) {
    const double base = a1 + 2.0 * p35 * ci[i];
    for (int j = 0; j < W; ++j) {
      const double inv = 1.0 / (base + 2.0 * p24 * cj[j]);
      g.d_a1 += inv;
      g.d_p35 += 2.0 * ci[i] * inv;
      g.d_p24 += 2.0 * cj[j] * inv;
    }
  }
  return g;
}

double logdet_seq(double a1, long n) {
  if (!(a1 > 0.0)) fail(Status::non_finite, "logdet_seq: center tap must be positive");
  return static_cast<double>(n) * std::log(a1);
}

namespace {

void fixed_plus_check(const Eigen::VectorXd& a) {
  if (a.size() != 5) fail(Status::invalid_argument, "fixed plus layer needs 5 taps");
  if (a[1] * a[3] < 0 || a[2] * a[4] < 0)
    fail(Status::invalid_argument,
         "fixed plus layer: opposite-tap products must be nonnegative");
  const double p24 = std::sqrt(a[1] * a[3]), p35 = std::sqrt(a[2] * a[4]);
  if (!(a[0] > 0.0) || a[0] - 2.0 * p24 - 2.0 * p35 < -1e-12)
    fail(Status::invalid_argument, "fixed plus layer: eigenvalues not positive");
}

}  // namespace

double Layer::logdet(int H, int W) const {
  const long n = static_cast<long>(H) * W;
  double sum = 0.0;
  for (int c = 0; c < channels; ++c) {
    switch (kind) {
      case LayerKind::plus: {
        const PlusDerived d = plus_derived(plus[c].rho);
        sum += logdet_plus(d.a1, d.p24, d.p35, H, W);
        break;
      }
      case LayerKind::plus_fixed: {
        const Eigen::VectorXd& a = fixed_taps[c];
        sum += logdet_plus(a[0], std::sqrt(a[1] * a[3]), std::sqrt(a[2] * a[4]), H, W);
        break;
      }
      case LayerKind::seq:
        sum += logdet_seq(std::exp(seq[c].eta), n);
        break;
    }
  }
  return sum;
}

void Layer::get_filter_params(double* out) const {
  if (!filters_trainable()) return;
  long k = 0;
  if (kind == LayerKind::plus) {
    for (int c = 0; c < channels; ++c)
      for (int r = 0; r < 6; ++r) out[k++] = plus[c].rho[r];
  } else {
    for (int c = 0; c < channels; ++c) {
      out[k++] = seq[c].eta;
      for (long t = 0; t < seq[c].off.size(); ++t) out[k++] = seq[c].off[t];
    }
  }
  const int side = 2 * radius + 1;
  for (const Filter2D& s : sub)
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) out[k++] = s(r, c);
}

void Layer::set_filter_params(const double* in) {
  if (!filters_trainable()) return;
  long k = 0;
  if (kind == LayerKind::plus) {
    for (int c = 0; c < channels; ++c)
      for (int r = 0; r < 6; ++r) plus[c].rho[r] = in[k++];
  } else {
    for (int c = 0; c < channels; ++c) {
      seq[c].eta = in[k++];
      for (long t = 0; t < seq[c].off.size(); ++t) seq[c].off[t] = in[k++];
    }
  }
  const int side = 2 * radius + 1;
  for (Filter2D& s : sub)
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) s(r, c) = in[k++];
}

Layer make_plus_layer(int channels) {
  Layer l;
  l.kind = LayerKind::plus;
  l.radius = 1;
  l.channels = channels;
  l.plus.resize(channels);
  l.sub.assign(l.sub_block_count(), Filter2D::Zero(3, 3));
  l.bias = Eigen::VectorXd::Zero(channels);
  return l;
}

Layer make_seq_layer(int channels, int radius, int orientation) {
  Layer l;
  l.kind = LayerKind::seq;
  l.radius = radius;
  l.channels = channels;
  l.orientation = orientation;
  l.seq.resize(channels);
  for (auto& s : l.seq) s.off = Eigen::VectorXd::Zero(seq_tap_count(radius));
  const int side = 2 * radius + 1;
  l.sub.assign(l.sub_block_count(), Filter2D::Zero(side, side));
  l.bias = Eigen::VectorXd::Zero(channels);
  (void)seq_offsets(radius, orientation);  // validates radius/orientation
  return l;
}

Layer make_fixed_plus_layer(double a1, double a2, double a3, double a4, double a5) {
  Layer l;
  l.kind = LayerKind::plus_fixed;
  l.radius = 1;
  l.channels = 1;
  Eigen::VectorXd a(5);
  a << a1, a2, a3, a4, a5;
  fixed_plus_check(a);
  l.fixed_taps.push_back(std::move(a));
  l.bias = Eigen::VectorXd::Zero(1);
  l.bias_trainable = false;
  return l;
}

Layer make_identity_layer(int channels) {
  if (channels != 1) {
    Layer l;
    l.kind = LayerKind::plus_fixed;
    l.radius = 1;
    l.channels = channels;
    Eigen::VectorXd a(5);
    a << 1.0, 0.0, 0.0, 0.0, 0.0;
    for (int c = 0; c < channels; ++c) l.fixed_taps.push_back(a);
    l.sub.assign(l.sub_block_count(), Filter2D::Zero(3, 3));
    l.bias = Eigen::VectorXd::Zero(channels);
    l.bias_trainable = false;
    return l;
  }
  return make_fixed_plus_layer(1.0, 0.0, 0.0, 0.0, 0.0);
}

bool DgmrfModel::linear() const {
  for (const Layer& l : layers)
    if (l.prelu) return false;
  return true;
}

int DgmrfModel::total_radius() const {
  int r = 0;
  for (const Layer& l : layers) r += l.radius;
  return r;
}

void DgmrfModel::validate() const {
  if (channels < 1) fail(Status::invalid_argument, "model: channels must be positive");
  for (const Layer& l : layers) {
    if (l.channels != channels)
      fail(Status::dimension_mismatch, "model: layer channel count mismatch");
    if (l.kind == LayerKind::plus && l.radius != 1)
      fail(Status::invalid_argument, "model: plus layers have radius 1");
    if (l.kind == LayerKind::plus_fixed)
      for (const auto& a : l.fixed_taps) fixed_plus_check(a);
    if (l.bias.size() != channels)
      fail(Status::dimension_mismatch, "model: bias length mismatch");
  }
}

namespace {

GridTensor apply_prelu(const GridTensor& h, double alpha, double* log_jac) {
  GridTensor out = h;
  long neg = 0;
  for (long i = 0; i < out.values.size(); ++i)
    if (out.values[i] < 0.0) {
      out.values[i] *= alpha;
      ++neg;
    }
  if (log_jac) *log_jac += static_cast<double>(neg) * std::log(alpha);
  return out;
}

}  // namespace

ForwardTrace forward_g(const DgmrfModel& model, const GridTensor& x, bool keep_trace) {
  if (x.C != model.channels)
    fail(Status::dimension_mismatch, "forward_g: input channels do not match model");
  ForwardTrace trace;
  GridTensor cur = x;
  for (const Layer& l : model.layers) {
    GridTensor rotated = rotate_channels(cur, l.input_shift);
    GridTensor h = conv_same(rotated, l.bank(), l.bias);
    if (keep_trace) {
      trace.conv_inputs.push_back(std::move(rotated));
      trace.pre_act.push_back(h);
    }
    cur = l.prelu ? apply_prelu(h, l.alpha(), &trace.log_jacobian) : std::move(h);
  }
  trace.z = std::move(cur);
  return trace;
}

GridTensor forward_linear(const DgmrfModel& model, const GridTensor& x) {
  if (!model.linear())
    fail(Status::unsupported, "forward_linear: model is not linear");
  GridTensor cur = x;
  for (const Layer& l : model.layers)
    cur = conv_same(rotate_channels(cur, l.input_shift), l.bank());
  return cur;
}

GridTensor adjoint_linear(const DgmrfModel& model, const GridTensor& v) {
  if (!model.linear())
    fail(Status::unsupported, "adjoint_linear: model is not linear");
  GridTensor cur = v;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it)
    cur = rotate_channels(conv_adjoint(cur, it->bank()), -it->input_shift);
  return cur;
}

Eigen::VectorXd model_bias(const DgmrfModel& model, int H, int W) {
  if (!model.linear())
    fail(Status::unsupported, "model_bias: undefined for non-linear models");
  GridTensor zero(H, W, model.channels);
  return forward_g(model, zero, false).z.values;
}

double model_logdet(const DgmrfModel& model, int H, int W) {
  double sum = 0.0;
  for (const Layer& l : model.layers) sum += l.logdet(H, W);
  return sum;
}

double log_prior_density(const DgmrfModel& model, const GridTensor& x) {
  const ForwardTrace trace = forward_g(model, x, false);
  const double n = static_cast<double>(x.size());
  return model_logdet(model, x.H, x.W) + trace.log_jacobian -
         0.5 * n * std::log(2.0 * std::numbers::pi) -
         0.5 * trace.z.values.squaredNorm();
}

DgmrfModel matern_layers(double kappa2, double tau, int gamma, int L) {
  if (gamma < 1) fail(Status::invalid_argument, "matern_layers: gamma must be >= 1");
  if (L < gamma) fail(Status::invalid_argument, "matern_layers: L must be >= gamma");
  if (!(tau > 0.0)) fail(Status::invalid_argument, "matern_layers: tau must be > 0");
  if (kappa2 < 0.0) fail(Status::invalid_argument, "matern_layers: kappa2 must be >= 0");
  const double c = std::pow(tau, 1.0 / gamma);
  DgmrfModel m;
  m.channels = 1;
  for (int l = 0; l < gamma; ++l)
    m.layers.push_back(make_fixed_plus_layer(c * (4.0 + kappa2), -c, -c, -c, -c));
  for (int l = gamma; l < L; ++l) m.layers.push_back(make_identity_layer(1));
  return m;
}

Eigen::VectorXd gram_diagonal(const DgmrfModel& model, int H, int W, bool windowed) {
  if (!model.linear())
    fail(Status::unsupported, "gram_diagonal: model is not linear");
  const int C = model.channels;
  Eigen::VectorXd diag(static_cast<long>(H) * W * C);
  if (!windowed) {
    GridTensor probe(H, W, C);
    for (long i = 0; i < diag.size(); ++i) {
      probe.values.setZero();
      probe.values[i] = 1.0;
      diag[i] = forward_linear(model, probe).values.squaredNorm();
    }
    return diag;
  }
  const int rt = model.total_radius();
  for (int r = 0; r < H; ++r) {
    const int r0 = std::max(0, r - rt), r1 = std::min(H, r + rt + 1);
    for (int c = 0; c < W; ++c) {
      const int c0 = std::max(0, c - rt), c1 = std::min(W, c + rt + 1);
      GridTensor probe(r1 - r0, c1 - c0, C);
      for (int ch = 0; ch < C; ++ch) {
        probe.values.setZero();
        probe.at(r - r0, c - c0, ch) = 1.0;
        diag[(static_cast<long>(r) * W + c) * C + ch] =
            forward_linear(model, probe).values.squaredNorm();
      }
    }
  }
  return diag;
}

DgmrfModel random_init_model(const ModelSpec& spec) {
  if (spec.layers < 1) fail(Status::invalid_argument, "model spec: layers must be >= 1");
  RngStream rng(mix_seed(spec.seed, 0x6d6f64656cULL));
  DgmrfModel m;
  m.channels = spec.channels;
  m.log_sigma = std::log(spec.sigma);
  m.sigma_trainable = spec.sigma_trainable;
  const double rho_id = softplus_inv(0.5);
  for (int l = 0; l < spec.layers; ++l) {
    Layer layer;
    if (spec.kind == LayerKind::seq) {
      const int orientation = static_cast<int>(rng.next_u64() % 8);
      layer = make_seq_layer(spec.channels, spec.radius, orientation);
      for (auto& s : layer.seq) {
        s.eta = spec.init_sd * rng.normal();
        for (long t = 0; t < s.off.size(); ++t) s.off[t] = spec.init_sd * rng.normal();
      }
    } else {
      layer = make_plus_layer(spec.channels);
      for (auto& p : layer.plus) {
        p.rho[0] = rho_id + spec.init_sd * rng.normal();
        p.rho[1] = rho_id + spec.init_sd * rng.normal();
        for (int r = 2; r < 6; ++r) p.rho[r] = spec.init_sd * rng.normal();
      }
    }
    for (Filter2D& s : layer.sub)
      for (int rr = 0; rr < s.rows(); ++rr)
        for (int cc = 0; cc < s.cols(); ++cc) s(rr, cc) = spec.init_sd * rng.normal();
    layer.bias_trainable = spec.bias_trainable;
    layer.prelu = spec.prelu;
    layer.input_shift = (l > 0 && spec.channels > 1) ? spec.channel_shift : 0;
    m.layers.push_back(std::move(layer));
  }
  m.validate();
  return m;
}

}  // namespace dgmrf
