#include "conv.hpp"

#include "error.hpp"

#include <algorithm>

namespace dgmrf {

namespace {

void check_filter(const Filter2D& f, int radius) {
  if (f.rows() != 2 * radius + 1 || f.cols() != 2 * radius + 1)
    fail(Status::dimension_mismatch, "filter taps do not match bank radius");
}

// out(r,c,i) += w * in(r+dr, c+dc, j) over the in-image range.
void add_shifted(const GridTensor& in, int j, double w, int dr, int dc,
                 GridTensor& out, int i) {
  const int H = in.H, W = in.W;
  const int r0 = std::max(0, -dr), r1 = std::min(H, H - dr);
  const int c0 = std::max(0, -dc), c1 = std::min(W, W - dc);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c)
      out.at(r, c, i) += w * in.at(r + dr, c + dc, j);
}

}  // namespace

GridTensor conv_same(const GridTensor& z, const FilterBank& bank,
                     const Eigen::VectorXd& bias) {
  if (z.C != bank.in_channels)
    fail(Status::dimension_mismatch, "conv_same: input channels do not match bank");
  if (bias.size() != bank.out_channels)
    fail(Status::dimension_mismatch, "conv_same: bias length does not match out channels");
  const int R = bank.radius;
  GridTensor out(z.H, z.W, bank.out_channels);
  for (int i = 0; i < bank.out_channels; ++i) {
    for (int j = 0; j < bank.in_channels; ++j) {
      const Filter2D& f = bank.tap(i, j);
      if (f.size() == 0) continue;
      check_filter(f, R);
      for (int dr = -R; dr <= R; ++dr)
        for (int dc = -R; dc <= R; ++dc) {
          const double w = f(R + dr, R + dc);
          if (w != 0.0) add_shifted(z, j, w, dr, dc, out, i);
        }
    }
    if (bias[i] != 0.0)
      for (int r = 0; r < out.H; ++r)
        for (int c = 0; c < out.W; ++c) out.at(r, c, i) += bias[i];
  }
  return out;
}

GridTensor conv_same(const GridTensor& z, const FilterBank& bank) {
  return conv_same(z, bank, Eigen::VectorXd::Zero(bank.out_channels));
}

GridTensor conv_adjoint(const GridTensor& v, const FilterBank& bank) {
  if (v.C != bank.out_channels)
    fail(Status::dimension_mismatch, "conv_adjoint: input channels do not match bank");
  const int R = bank.radius;
  GridTensor out(v.H, v.W, bank.in_channels);
  for (int j = 0; j < bank.in_channels; ++j)
    for (int i = 0; i < bank.out_channels; ++i) {
      const Filter2D& f = bank.tap(i, j);
      if (f.size() == 0) continue;
      check_filter(f, R);
      for (int dr = -R; dr <= R; ++dr)
        for (int dc = -R; dc <= R; ++dc) {
          const double w = f(R + dr, R + dc);
          if (w != 0.0) add_shifted(v, i, w, -dr, -dc, out, j);
        }
    }
  return out;
}

FilterBank conv_tap_gradient(const GridTensor& input, const GridTensor& upstream,
                             const FilterBank& bank) {
  if (input.C != bank.in_channels || upstream.C != bank.out_channels ||
      input.H != upstream.H || input.W != upstream.W)
    fail(Status::dimension_mismatch, "conv_tap_gradient: shape mismatch");
  const int R = bank.radius;
  const int H = input.H, W = input.W;
  FilterBank grad(bank.out_channels, bank.in_channels, R);
  for (int i = 0; i < bank.out_channels; ++i)
    for (int j = 0; j < bank.in_channels; ++j) {
      if (bank.tap(i, j).size() == 0) continue;
      Filter2D g = Filter2D::Zero(2 * R + 1, 2 * R + 1);
      for (int dr = -R; dr <= R; ++dr)
        for (int dc = -R; dc <= R; ++dc) {
          const int r0 = std::max(0, -dr), r1 = std::min(H, H - dr);
          const int c0 = std::max(0, -dc), c1 = std::min(W, W - dc);
          double acc = 0.0;
          for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
              acc += upstream.at(r, c, i) * input.at(r + dr, c + dc, j);
          g(R + dr, R + dc) = acc;
        }
      grad.tap(i, j) = std::move(g);
    }
  return grad;
}

GridTensor rotate_channels(const GridTensor& t, int shift) {
  const int C = t.C;
  int s = shift % C;
  if (s < 0) s += C;
  if (s == 0) return t;
  GridTensor out(t.H, t.W, C);
  for (int r = 0; r < t.H; ++r)
    for (int c = 0; c < t.W; ++c)
      for (int ch = 0; ch < C; ++ch)
        out.at(r, c, ch) = t.at(r, c, (ch + s) % C);
  return out;
}

Eigen::MatrixXd assemble_dense(const LinearGridOp& op, int H, int W, int C) {
  const long n = static_cast<long>(H) * W * C;
  if (n > 4096)
    fail(Status::invalid_argument, "assemble_dense: N > 4096 refused");
  Eigen::MatrixXd m(n, n);
  GridTensor basis(H, W, C);
  for (long j = 0; j < n; ++j) {
    basis.values.setZero();
    basis.values[j] = 1.0;
    GridTensor col = op(basis);
    if (col.size() != n)
      fail(Status::dimension_mismatch, "assemble_dense: operator changed shape");
    m.col(j) = col.values;
  }
  return m;
}

}  // namespace dgmrf
