#include "data_io.hpp"

#include "error.hpp"
#include "model.hpp"
#include "posterior.hpp"
#include "util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dgmrf {

namespace {

[[noreturn]] void parse_fail(const std::string& path, long line, const std::string& msg) {
  std::ostringstream os;
  os << path << ":" << line << ": " << msg;
  fail(Status::parse_error, os.str());
}

}  // namespace

Dataset load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open " + path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, "missing header");
  ++line_no;
  const auto head = split_ws(line);
  long long H = 0, W = 0, C = 0;
  if (head.size() != 3 || !parse_long(head[0], &H) || !parse_long(head[1], &W) ||
      !parse_long(head[2], &C) || H < 1 || W < 1 || C < 1)
    parse_fail(path, line_no, "malformed header, expected \"H W C\"");
  Dataset d;
  d.y = GridTensor(static_cast<int>(H), static_cast<int>(W), static_cast<int>(C));
  d.mask = Mask(static_cast<int>(H), static_cast<int>(W), 1);
  const long n = d.y.size();
  long k = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (const auto& tok : split_ws(line)) {
      if (k >= n) parse_fail(path, line_no, "more values than H*W*C");
      double v = 0.0;
      if (!parse_double(tok, &v))
        parse_fail(path, line_no, "non-numeric token \"" + tok + "\"");
      if (std::isnan(v)) {
        const long pix = k / d.y.C;
        d.mask.obs[pix] = 0;
        d.y.values[k] = 0.0;
      } else {
        d.y.values[k] = v;
      }
      ++k;
    }
  }
  if (k != n) parse_fail(path, line_no, "value count mismatch, expected H*W*C");
  // A pixel with any NaN channel counts as missing; zero its other channels.
  for (int r = 0; r < d.y.H; ++r)
    for (int c = 0; c < d.y.W; ++c)
      if (!d.mask.at(r, c))
        for (int ch = 0; ch < d.y.C; ++ch) d.y.at(r, c, ch) = 0.0;
  return d;
}

namespace {

void write_grid(std::ostream& out, const GridTensor& t, const Mask* mask) {
  out << t.H << " " << t.W << " " << t.C << "\n";
  for (int r = 0; r < t.H; ++r) {
    for (int c = 0; c < t.W; ++c)
      for (int ch = 0; ch < t.C; ++ch) {
        if (c != 0 || ch != 0) out << " ";
        if (mask && !mask->at(r, c))
          out << "NaN";
        else
          out << format_double(t.at(r, c, ch));
      }
    out << "\n";
  }
}

}  // namespace

void save_grid(const std::string& path, const GridTensor& t) {
  std::ofstream out(path);
  if (!out) fail(Status::io_error, "cannot write " + path);
  write_grid(out, t, nullptr);
}

void save_grid(const std::string& path, const GridTensor& t, const Mask& mask) {
  if (mask.H != t.H || mask.W != t.W)
    fail(Status::dimension_mismatch, "save_grid: mask shape mismatch");
  std::ofstream out(path);
  if (!out) fail(Status::io_error, "cannot write " + path);
  write_grid(out, t, &mask);
}

Eigen::MatrixXd load_covariates(const std::string& path) {
  const Dataset d = load_grid(path);
  const long rows = static_cast<long>(d.y.H) * d.y.W;
  Eigen::MatrixXd f(rows, d.y.C);
  for (long r = 0; r < rows; ++r)
    for (int c = 0; c < d.y.C; ++c) f(r, c) = d.y.values[r * d.y.C + c];
  return f;
}

void save_covariates(const std::string& path, const Eigen::MatrixXd& f, int H, int W) {
  if (f.rows() != static_cast<long>(H) * W)
    fail(Status::dimension_mismatch, "save_covariates: row count must equal H*W");
  GridTensor t(H, W, static_cast<int>(f.cols()));
  for (long r = 0; r < f.rows(); ++r)
    for (int c = 0; c < f.cols(); ++c) t.values[r * f.cols() + c] = f(r, c);
  save_grid(path, t);
}

std::vector<EdgeSpec> parse_edges(const std::string& spec) {
  std::vector<EdgeSpec> out;
  if (trim(spec).empty()) return out;
  for (const auto& part : split(spec, ';')) {
    if (trim(part).empty()) continue;
    const auto f = split(trim(part), ':');
    if (f.size() != 3 && f.size() != 5)
      fail(Status::parse_error, "edge spec needs axis:index:amp[:lo:hi]: " + part);
    EdgeSpec e;
    if (f[0] == "v")
      e.vertical = true;
    else if (f[0] == "h")
      e.vertical = false;
    else
      fail(Status::parse_error, "edge axis must be v or h: " + part);
    long long idx = 0;
    double amp = 0.0;
    if (!parse_long(f[1], &idx) || !parse_double(f[2], &amp))
      fail(Status::parse_error, "malformed edge spec: " + part);
    e.index = static_cast<int>(idx);
    e.amplitude = amp;
    if (f.size() == 5) {
      long long lo = 0, hi = 0;
      if (!parse_long(f[3], &lo) || !parse_long(f[4], &hi))
        fail(Status::parse_error, "malformed edge range: " + part);
      e.lo = static_cast<int>(lo);
      e.hi = static_cast<int>(hi);
    }
    out.push_back(e);
  }
  return out;
}

std::vector<HoleSpec> parse_holes(const std::string& spec) {
  std::vector<HoleSpec> out;
  if (trim(spec).empty()) return out;
  for (const auto& part : split(spec, ';')) {
    if (trim(part).empty()) continue;
    const auto f = split(trim(part), ':');
    long long v[4];
    if (f.size() != 4 || !parse_long(f[0], &v[0]) || !parse_long(f[1], &v[1]) ||
        !parse_long(f[2], &v[2]) || !parse_long(f[3], &v[3]))
      fail(Status::parse_error, "hole spec needs r0:c0:h:w: " + part);
    out.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]),
                   static_cast<int>(v[2]), static_cast<int>(v[3])});
  }
  return out;
}

GridTensor gen_matern(const ToyConfig& cfg) {
  const DgmrfModel prior = matern_layers(cfg.kappa2, cfg.tau, cfg.gamma, cfg.gamma);
  RngStream rng(mix_seed(cfg.seed, 0x746f79ULL));
  Eigen::VectorXd z(static_cast<long>(cfg.H) * cfg.W);
  for (long i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // tau (kappa^2 I + G)^gamma is symmetric positive definite, so CG applies
  // to the operator itself.
  const LinearVecOp op = [&](const Eigen::VectorXd& u) {
    return forward_linear(prior, devectorize(u, cfg.H, cfg.W, 1)).values;
  };
  const CgResult sol = cg_solve(op, z, cfg.cg_delta);
  return devectorize(sol.x, cfg.H, cfg.W, 1);
}

GridTensor add_edges(const GridTensor& field, const std::vector<EdgeSpec>& edges) {
  GridTensor out = field;
  for (const EdgeSpec& e : edges) {
    const int cross_max = e.vertical ? field.H : field.W;
    const int lo = e.lo;
    const int hi = e.hi <= 0 ? cross_max : e.hi;
    const int along_max = e.vertical ? field.W : field.H;
    if (e.index < 0 || e.index >= along_max || lo < 0 || hi > cross_max || lo >= hi)
      fail(Status::invalid_argument, "add_edges: segment out of bounds");
    for (int r = 0; r < field.H; ++r)
      for (int c = 0; c < field.W; ++c) {
        const int along = e.vertical ? c : r;
        const int cross = e.vertical ? r : c;
        if (along >= e.index && cross >= lo && cross < hi)
          for (int ch = 0; ch < field.C; ++ch) out.at(r, c, ch) += e.amplitude;
      }
  }
  return out;
}

Mask gen_mask(const ToyConfig& cfg) {
  Mask m(cfg.H, cfg.W, 1);
  if (cfg.miss_fraction > 0.0) {
    RngStream rng(mix_seed(cfg.seed, 0x6d61736bULL));
    for (int r = 0; r < cfg.H; ++r)
      for (int c = 0; c < cfg.W; ++c)
        if (rng.uniform() < cfg.miss_fraction) m.set(r, c, 0);
  }
  for (const HoleSpec& h : cfg.holes) {
    if (h.r0 < 0 || h.c0 < 0 || h.r0 + h.h > cfg.H || h.c0 + h.w > cfg.W)
      fail(Status::invalid_argument, "gen_mask: hole out of bounds");
    for (int r = h.r0; r < h.r0 + h.h; ++r)
      for (int c = h.c0; c < h.c0 + h.w; ++c) m.set(r, c, 0);
  }
  return m;
}

Dataset apply_mask(const GridTensor& truth, const Mask& mask) {
  if (mask.H != truth.H || mask.W != truth.W)
    fail(Status::dimension_mismatch, "apply_mask: shape mismatch");
  Dataset d;
  d.y = truth;
  d.mask = mask;
  for (int r = 0; r < truth.H; ++r)
    for (int c = 0; c < truth.W; ++c)
      if (!mask.at(r, c))
        for (int ch = 0; ch < truth.C; ++ch) d.y.at(r, c, ch) = 0.0;
  return d;
}

Dataset convert_lonlat_csv(const std::string& path, int H, int W) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open " + path);
  Dataset d;
  d.y = GridTensor(H, W, 1);
  d.mask = Mask(H, W, 1);
  Eigen::MatrixXd f(static_cast<long>(H) * W, 3);
  std::string line;
  long line_no = 0;
  long k = 0;
  const long n = static_cast<long>(H) * W;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line_no == 1) {
      // Optional header row.
      double probe = 0.0;
      const auto fields = split(line, ',');
      if (!fields.empty() && !parse_double(trim(fields[0]), &probe)) continue;
    }
    if (k >= n) parse_fail(path, line_no, "more rows than H*W");
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      parse_fail(path, line_no, "expected lon,lat,value");
    double lon = 0.0, lat = 0.0;
    if (!parse_double(trim(fields[0]), &lon) || !parse_double(trim(fields[1]), &lat))
      parse_fail(path, line_no, "malformed coordinates");
    f(k, 0) = 1.0;
    f(k, 1) = lon;
    f(k, 2) = lat;
    const std::string val = trim(fields[2]);
    if (val.empty() || val == "NA") {
      d.mask.obs[k] = 0;
      d.y.values[k] = 0.0;
    } else {
      double v = 0.0;
      if (!parse_double(val, &v)) parse_fail(path, line_no, "malformed value");
      if (std::isnan(v)) {
        d.mask.obs[k] = 0;
        d.y.values[k] = 0.0;
      } else {
        d.y.values[k] = v;
      }
    }
    ++k;
  }
  if (k != n) parse_fail(path, line_no, "row count mismatch, expected H*W");
  d.covariates = std::move(f);
  return d;
}

double normalization_scale(const Dataset& d) {
  double mx = 0.0;
  bool any = false;
  for (int r = 0; r < d.y.H; ++r)
    for (int c = 0; c < d.y.W; ++c)
      if (d.mask.at(r, c))
        for (int ch = 0; ch < d.y.C; ++ch) {
          mx = any ? std::max(mx, d.y.at(r, c, ch)) : d.y.at(r, c, ch);
          any = true;
        }
  return (any && mx > 0.0) ? mx : 1.0;
}

}  // namespace dgmrf
