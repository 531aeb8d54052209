#pragma once

#include "grid.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace dgmrf {

// Square odd-sided stencil; taps(R+dr, R+dc) multiplies the input pixel at
// offset (dr, dc) from the output pixel.
using Filter2D = Eigen::MatrixXd;

// C_out x C_in bank of equal-radius 2D filters. An empty matrix marks a
// structurally zero block (used for the upper channel blocks of
// determinant-tractable layers).
struct FilterBank {
  int out_channels = 1;
  int in_channels = 1;
  int radius = 1;
  std::vector<Filter2D> taps;  // taps[i*in_channels + j], may be empty

  FilterBank() = default;
  FilterBank(int out_c, int in_c, int r)
      : out_channels(out_c), in_channels(in_c), radius(r),
        taps(static_cast<std::size_t>(out_c) * in_c) {}

  Filter2D& tap(int i, int j) { return taps[static_cast<std::size_t>(i) * in_channels + j]; }
  const Filter2D& tap(int i, int j) const {
    return taps[static_cast<std::size_t>(i) * in_channels + j];
  }
};

// Multichannel same convolution with zero padding:
//   out(r,c,i) = bias_i + sum_j sum_{dr,dc} tap(i,j)(R+dr,R+dc) * z(r+dr,c+dc,j)
// Out-of-image reads are zero, which keeps the induced matrix invertible for
// the layer families used here. Summation order is fixed.
GridTensor conv_same(const GridTensor& z, const FilterBank& bank,
                     const Eigen::VectorXd& bias);

GridTensor conv_same(const GridTensor& z, const FilterBank& bank);

// Transpose of the linear map of conv_same (zero bias): same convolution with
// each filter flipped 180 degrees and the channel indices transposed.
GridTensor conv_adjoint(const GridTensor& v, const FilterBank& bank);

// d/d taps(i,j)(R+dr,R+dc) of <upstream, conv_same(input)>:
//   sum_{r,c} upstream(r,c,i) * input(r+dr,c+dc,j).
// Accumulates one gradient bank shaped like `bank` (empty blocks skipped).
FilterBank conv_tap_gradient(const GridTensor& input, const GridTensor& upstream,
                             const FilterBank& bank);

// Cyclic channel rotation: out(r,c,ch) = in(r,c,(ch+shift) mod C).
// A permutation, so |det| = 1; the inverse is rotation by -shift.
GridTensor rotate_channels(const GridTensor& t, int shift);

using LinearGridOp = std::function<GridTensor(const GridTensor&)>;

// Materializes a linear grid operator as a dense N x N matrix (N = HWC),
// column j = op applied to the j-th canonical basis grid. Test-oracle
// builder; refuses N > 4096.
Eigen::MatrixXd assemble_dense(const LinearGridOp& op, int H, int W, int C);

}  // namespace dgmrf
