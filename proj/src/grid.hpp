#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace dgmrf {

// H x W x C lattice field. Values are stored in the canonical vectorization:
// row-major over (row, column, channel), i.e. flat index (r*W + c)*C + ch.
// All operators and file formats share this single layout.
struct GridTensor {
  int H = 0;
  int W = 0;
  int C = 1;
  Eigen::VectorXd values;

  GridTensor() = default;
  GridTensor(int h, int w, int c)
      : H(h), W(w), C(c), values(Eigen::VectorXd::Zero(static_cast<long>(h) * w * c)) {}

  long size() const { return static_cast<long>(H) * W * C; }

  long index(int r, int c, int ch) const {
    return (static_cast<long>(r) * W + c) * C + ch;
  }

  double& at(int r, int c, int ch) { return values[index(r, c, ch)]; }
  double at(int r, int c, int ch) const { return values[index(r, c, ch)]; }

  bool same_shape(const GridTensor& other) const {
    return H == other.H && W == other.W && C == other.C;
  }
};

// vec(Z): returns the canonical length-HWC vector.
Eigen::VectorXd vectorize(const GridTensor& t);

// Inverse of vectorize for the given shape.
GridTensor devectorize(const Eigen::VectorXd& v, int H, int W, int C);

// Per-pixel observation indicator: 1 = observed, 0 = missing. Channels at an
// observed pixel are all observed.
struct Mask {
  int H = 0;
  int W = 0;
  std::vector<std::uint8_t> obs;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 1)
      : H(h), W(w), obs(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t at(int r, int c) const { return obs[static_cast<std::size_t>(r) * W + c]; }
  void set(int r, int c, std::uint8_t v) { obs[static_cast<std::size_t>(r) * W + c] = v; }
  long observed_count() const;
};

// Observations y (0 at missing pixels) plus the mask, and optionally a
// per-pixel covariate matrix F (HW rows); columns are typically
// (constant, longitude, latitude).
struct Dataset {
  GridTensor y;
  Mask mask;
  std::optional<Eigen::MatrixXd> covariates;

  long observed_pixels() const { return mask.observed_count(); }
  // Number of observed scalar entries (pixels times channels).
  long observed_values() const { return mask.observed_count() * y.C; }

  void validate() const;  // throws on invariant violation
};

// Extends the grid with a `width`-pixel frame of missing values on all sides.
// The interior is copied unchanged; the observed count is preserved.
// Covariate rows for frame pixels are zero (they never enter the likelihood).
Dataset pad_frame(const Dataset& d, int width);

GridTensor pad_frame(const GridTensor& t, int width);

// Inverse of pad_frame on the grid values. Requires width < min(H, W)/2.
GridTensor crop_frame(const GridTensor& t, int width);

Mask crop_frame(const Mask& m, int width);

}  // namespace dgmrf
