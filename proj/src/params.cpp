#include "params.hpp"

#include "error.hpp"

namespace dgmrf {

VariationalParams init_variational(const Dataset& d, int trend_p) {
  VariationalParams v;
  const long n = d.y.size();
  v.nu = Eigen::VectorXd::Zero(n);
  v.log_s = Eigen::VectorXd::Zero(n);
  // Warm start at the data, missing pixels filled with the observed mean.
  double mean = 0.0;
  const long m = d.observed_values();
  if (m > 0) {
    double sum = 0.0;
    for (int r = 0; r < d.y.H; ++r)
      for (int c = 0; c < d.y.W; ++c)
        if (d.mask.at(r, c))
          for (int ch = 0; ch < d.y.C; ++ch) sum += d.y.at(r, c, ch);
    mean = sum / static_cast<double>(m);
  }
  for (int r = 0; r < d.y.H; ++r)
    for (int c = 0; c < d.y.W; ++c)
      for (int ch = 0; ch < d.y.C; ++ch)
        v.nu[d.y.index(r, c, ch)] = d.mask.at(r, c) ? d.y.at(r, c, ch) : mean;
  if (trend_p > 0) {
    v.nu_beta = Eigen::VectorXd::Zero(trend_p);
    v.log_s_beta = Eigen::VectorXd::Zero(trend_p);
  }
  return v;
}

ParamLayout make_layout(const DgmrfModel& model, long n, long p) {
  ParamLayout lay;
  long off = 0;
  for (const Layer& l : model.layers) {
    ParamLayout::LayerSeg seg;
    seg.filter_n = l.filter_param_count();
    if (seg.filter_n > 0) {
      seg.filter_off = off;
      off += seg.filter_n;
    }
    if (l.bias_trainable) {
      seg.bias_off = off;
      seg.bias_n = l.bias.size();
      off += seg.bias_n;
    }
    if (l.prelu) {
      seg.alpha_off = off;
      off += 1;
    }
    lay.layers.push_back(seg);
  }
  if (model.sigma_trainable) {
    lay.sigma_off = off;
    off += 1;
  }
  lay.nu_off = off;
  off += n;
  lay.log_s_off = off;
  off += n;
  lay.n = n;
  if (p > 0) {
    lay.nu_beta_off = off;
    off += p;
    lay.log_s_beta_off = off;
    off += p;
  }
  lay.p = p;
  lay.total = off;
  return lay;
}

Eigen::VectorXd pack_params(const DgmrfModel& model, const VariationalParams& var,
                            const ParamLayout& layout) {
  Eigen::VectorXd v(layout.total);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const auto& seg = layout.layers[i];
    if (seg.filter_n > 0) l.get_filter_params(v.data() + seg.filter_off);
    if (seg.bias_off >= 0) v.segment(seg.bias_off, seg.bias_n) = l.bias;
    if (seg.alpha_off >= 0) v[seg.alpha_off] = l.log_alpha;
  }
  if (layout.sigma_off >= 0) v[layout.sigma_off] = model.log_sigma;
  v.segment(layout.nu_off, layout.n) = var.nu;
  v.segment(layout.log_s_off, layout.n) = var.log_s;
  if (layout.p > 0) {
    v.segment(layout.nu_beta_off, layout.p) = var.nu_beta;
    v.segment(layout.log_s_beta_off, layout.p) = var.log_s_beta;
  }
  return v;
}

void unpack_params(const Eigen::VectorXd& v, const ParamLayout& layout,
                   DgmrfModel& model, VariationalParams& var) {
  if (v.size() != layout.total)
    fail(Status::dimension_mismatch, "unpack_params: vector length mismatch");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& l = model.layers[i];
    const auto& seg = layout.layers[i];
    if (seg.filter_n > 0) l.set_filter_params(v.data() + seg.filter_off);
    if (seg.bias_off >= 0) l.bias = v.segment(seg.bias_off, seg.bias_n);
    if (seg.alpha_off >= 0) l.log_alpha = v[seg.alpha_off];
  }
  if (layout.sigma_off >= 0) model.log_sigma = v[layout.sigma_off];
  var.nu = v.segment(layout.nu_off, layout.n);
  var.log_s = v.segment(layout.log_s_off, layout.n);
  if (layout.p > 0) {
    var.nu_beta = v.segment(layout.nu_beta_off, layout.p);
    var.log_s_beta = v.segment(layout.log_s_beta_off, layout.p);
  }
}

}  // namespace dgmrf
