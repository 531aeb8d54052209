#include "grid.hpp"

#include "error.hpp"

namespace dgmrf {

Eigen::VectorXd vectorize(const GridTensor& t) { return t.values; }

GridTensor devectorize(const Eigen::VectorXd& v, int H, int W, int C) {
  if (v.size() != static_cast<long>(H) * W * C)
    fail(Status::dimension_mismatch, "devectorize: vector length does not match H*W*C");
  GridTensor t(H, W, C);
  t.values = v;
  return t;
}

long Mask::observed_count() const {
  long n = 0;
  for (auto v : obs) n += v ? 1 : 0;
  return n;
}

void Dataset::validate() const {
  if (mask.H != y.H || mask.W != y.W)
    fail(Status::dimension_mismatch, "dataset: mask shape does not match observations");
  for (int r = 0; r < y.H; ++r)
    for (int c = 0; c < y.W; ++c)
      if (!mask.at(r, c))
        for (int ch = 0; ch < y.C; ++ch)
          if (y.at(r, c, ch) != 0.0)
            fail(Status::invalid_argument, "dataset: nonzero value at missing pixel");
  if (covariates && covariates->rows() != static_cast<long>(y.H) * y.W)
    fail(Status::dimension_mismatch, "dataset: covariate rows must equal H*W");
}

GridTensor pad_frame(const GridTensor& t, int width) {
  if (width < 0) fail(Status::invalid_argument, "pad_frame: negative width");
  if (width == 0) return t;
  GridTensor out(t.H + 2 * width, t.W + 2 * width, t.C);
  for (int r = 0; r < t.H; ++r)
    for (int c = 0; c < t.W; ++c)
      for (int ch = 0; ch < t.C; ++ch)
        out.at(r + width, c + width, ch) = t.at(r, c, ch);
  return out;
}

Dataset pad_frame(const Dataset& d, int width) {
  if (width < 0) fail(Status::invalid_argument, "pad_frame: negative width");
  if (width == 0) return d;
  Dataset out;
  out.y = pad_frame(d.y, width);
  out.mask = Mask(d.mask.H + 2 * width, d.mask.W + 2 * width, 0);
  for (int r = 0; r < d.mask.H; ++r)
    for (int c = 0; c < d.mask.W; ++c)
      out.mask.set(r + width, c + width, d.mask.at(r, c));
  if (d.covariates) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(
        static_cast<long>(out.y.H) * out.y.W, d.covariates->cols());
    for (int r = 0; r < d.y.H; ++r)
      for (int c = 0; c < d.y.W; ++c)
        f.row(static_cast<long>(r + width) * out.y.W + (c + width)) =
            d.covariates->row(static_cast<long>(r) * d.y.W + c);
    out.covariates = std::move(f);
  }
  return out;
}

GridTensor crop_frame(const GridTensor& t, int width) {
  if (width < 0) fail(Status::invalid_argument, "crop_frame: negative width");
  if (width == 0) return t;
  if (2 * width >= t.H || 2 * width >= t.W)
    fail(Status::dimension_mismatch, "crop_frame: width too large for grid");
  GridTensor out(t.H - 2 * width, t.W - 2 * width, t.C);
  for (int r = 0; r < out.H; ++r)
    for (int c = 0; c < out.W; ++c)
      for (int ch = 0; ch < out.C; ++ch)
        out.at(r, c, ch) = t.at(r + width, c + width, ch);
  return out;
}

Mask crop_frame(const Mask& m, int width) {
  if (width < 0) fail(Status::invalid_argument, "crop_frame: negative width");
  if (width == 0) return m;
  if (2 * width >= m.H || 2 * width >= m.W)
    fail(Status::dimension_mismatch, "crop_frame: width too large for mask");
  Mask out(m.H - 2 * width, m.W - 2 * width, 0);
  for (int r = 0; r < out.H; ++r)
    for (int c = 0; c < out.W; ++c)
      out.set(r, c, m.at(r + width, c + width));
  return out;
}

}  // namespace dgmrf
