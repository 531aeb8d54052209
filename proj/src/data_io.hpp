#pragma once

#include "grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dgmrf {

// Text grid format: header line "H W C", then H*W*C decimal values in the
// canonical layout (one image row per line), NaN marking missing entries.
// Written with 17 significant digits, so save/load round-trips bit-exactly.
Dataset load_grid(const std::string& path);
void save_grid(const std::string& path, const GridTensor& t);
void save_grid(const std::string& path, const GridTensor& t, const Mask& mask);

// Covariate matrices reuse the grid format with C = p (columns per pixel).
Eigen::MatrixXd load_covariates(const std::string& path);
void save_covariates(const std::string& path, const Eigen::MatrixXd& f, int H, int W);

struct EdgeSpec {
  bool vertical = true;  // vertical edge at column `index`: columns >= index shift
  int index = 0;
  double amplitude = 0.0;
  int lo = 0;   // cross-range [lo, hi); hi <= 0 means full extent
  int hi = 0;
};

// "v:index:amp[:lo:hi];h:index:amp[:lo:hi];..."
std::vector<EdgeSpec> parse_edges(const std::string& spec);

struct HoleSpec {
  int r0 = 0, c0 = 0, h = 0, w = 0;
};

// "r0:c0:h:w;..."
std::vector<HoleSpec> parse_holes(const std::string& spec);

struct ToyConfig {
  int H = 160;
  int W = 120;
  double kappa2 = 8.0 / (50.0 * 50.0);
  double tau = 1.0;
  int gamma = 1;
  std::uint64_t seed = 1;
  std::vector<EdgeSpec> edges;
  double miss_fraction = 0.0;
  std::vector<HoleSpec> holes;
  double cg_delta = 1e-7;
};

// Draws z ~ N(0, I) and solves tau (kappa^2 I + G)^gamma x = z with CG.
// Deterministic given the seed.
GridTensor gen_matern(const ToyConfig& cfg);

// Adds piecewise-constant offsets across horizontal/vertical lines.
GridTensor add_edges(const GridTensor& field, const std::vector<EdgeSpec>& edges);

// Missingness: each pixel dropped with probability miss_fraction (seeded),
// then the rectangular holes are removed entirely.
Mask gen_mask(const ToyConfig& cfg);

// Masks a complete field into a Dataset (zeros at missing).
Dataset apply_mask(const GridTensor& truth, const Mask& mask);

// Converts a CSV of (lon, lat, value-or-empty) rows in row-major grid order
// into an observation dataset with covariate columns (constant, lon, lat).
Dataset convert_lonlat_csv(const std::string& path, int H, int W);

// Largest observed value (normalization "max pixel value 1" scale factor is
// 1/this). Returns 1.0 when nothing is observed or the max is <= 0.
double normalization_scale(const Dataset& d);

}  // namespace dgmrf
