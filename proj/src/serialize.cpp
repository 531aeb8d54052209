#include "serialize.hpp"

#include "error.hpp"
#include "util.hpp"

#include <fstream>
#include <sstream>

namespace dgmrf {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::plus: return "plus";
    case LayerKind::plus_fixed: return "plus_fixed";
    case LayerKind::seq: return "seq";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  if (s == "plus") return LayerKind::plus;
  if (s == "plus_fixed") return LayerKind::plus_fixed;
  if (s == "seq") return LayerKind::seq;
  fail(Status::parse_error, "unknown layer kind: " + s);
}

void write_vector(std::ostream& out, const char* key, const Eigen::VectorXd& v) {
  out << key << " " << v.size();
  for (long i = 0; i < v.size(); ++i) out << " " << format_double(v[i]);
  out << "\n";
}

class TokenReader {
public:
  TokenReader(const std::string& path, std::istream& in) : path_(path), in_(in) {}

  bool next_line(std::vector<std::string>* tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      auto t = split_ws(line);
      if (!t.empty()) {
        *tokens = std::move(t);
        return true;
      }
    }
    return false;
  }

  [[noreturn]] void error(const std::string& msg) const {
    std::ostringstream os;
    os << path_ << ":" << line_no_ << ": " << msg;
    fail(Status::parse_error, os.str());
  }

  double to_double(const std::string& tok) const {
    double v = 0.0;
    if (!parse_double(tok, &v)) error("expected number, got \"" + tok + "\"");
    return v;
  }

  long to_long(const std::string& tok) const {
    long long v = 0;
    if (!parse_long(tok, &v)) error("expected integer, got \"" + tok + "\"");
    return static_cast<long>(v);
  }

  Eigen::VectorXd read_vector(const std::vector<std::string>& t, std::size_t from) const {
    if (from >= t.size()) error("missing vector length");
    const long n = to_long(t[from]);
    if (static_cast<long>(t.size()) - static_cast<long>(from) - 1 != n)
      error("vector length mismatch");
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v[i] = to_double(t[from + 1 + i]);
    return v;
  }

private:
  std::string path_;
  std::istream& in_;
  long line_no_ = 0;
};

void write_model(std::ostream& out, const DgmrfModel& m) {
  out << "dgmrf-model 1\n";
  out << "channels " << m.channels << "\n";
  out << "log_sigma " << format_double(m.log_sigma) << " "
      << (m.sigma_trainable ? "trainable" : "fixed") << "\n";
  out << "layers " << m.layers.size() << "\n";
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& l = m.layers[li];
    out << "layer " << li << " " << kind_name(l.kind) << " radius " << l.radius
        << " shift " << l.input_shift << " orientation " << l.orientation
        << " prelu " << (l.prelu ? 1 : 0) << "\n";
    if (l.prelu) out << "log_alpha " << format_double(l.log_alpha) << "\n";
    out << "bias_mode " << (l.bias_trainable ? "trainable" : "fixed") << "\n";
    write_vector(out, "bias", l.bias);
    for (int c = 0; c < l.channels; ++c) {
      switch (l.kind) {
        case LayerKind::plus: {
          out << "rho " << c;
          for (int r = 0; r < 6; ++r) out << " " << format_double(l.plus[c].rho[r]);
          out << "\n";
          break;
        }
        case LayerKind::plus_fixed: {
          out << "taps " << c;
          for (int r = 0; r < 5; ++r) out << " " << format_double(l.fixed_taps[c][r]);
          out << "\n";
          break;
        }
        case LayerKind::seq: {
          out << "eta " << c << " " << format_double(l.seq[c].eta) << "\n";
          out << "off " << c << " " << l.seq[c].off.size();
          for (long t = 0; t < l.seq[c].off.size(); ++t)
            out << " " << format_double(l.seq[c].off[t]);
          out << "\n";
          break;
        }
      }
    }
    int idx = 0;
    for (int i = 1; i < l.channels; ++i)
      for (int j = 0; j < i; ++j) {
        const Filter2D& s = l.sub[idx++];
        out << "sub " << i << " " << j;
        for (long rr = 0; rr < s.rows(); ++rr)
          for (long cc = 0; cc < s.cols(); ++cc) out << " " << format_double(s(rr, cc));
        out << "\n";
      }
    out << "end_layer\n";
  }
  out << "end_model\n";
}

DgmrfModel read_model(TokenReader& r) {
  std::vector<std::string> t;
  if (!r.next_line(&t) || t.size() != 2 || t[0] != "dgmrf-model" || t[1] != "1")
    r.error("expected \"dgmrf-model 1\" header");
  DgmrfModel m;
  if (!r.next_line(&t) || t.size() != 2 || t[0] != "channels") r.error("expected channels");
  m.channels = static_cast<int>(r.to_long(t[1]));
  if (!r.next_line(&t) || t.size() != 3 || t[0] != "log_sigma") r.error("expected log_sigma");
  m.log_sigma = r.to_double(t[1]);
  m.sigma_trainable = (t[2] == "trainable");
  if (!r.next_line(&t) || t.size() != 2 || t[0] != "layers") r.error("expected layers");
  const long n_layers = r.to_long(t[1]);
  for (long li = 0; li < n_layers; ++li) {
    if (!r.next_line(&t) || t.size() != 11 || t[0] != "layer") r.error("expected layer");
    Layer l;
    l.kind = kind_from(t[2]);
    l.radius = static_cast<int>(r.to_long(t[4]));
    l.channels = m.channels;
    l.input_shift = static_cast<int>(r.to_long(t[6]));
    l.orientation = static_cast<int>(r.to_long(t[8]));
    l.prelu = r.to_long(t[10]) != 0;
    if (l.prelu) {
      if (!r.next_line(&t) || t.size() != 2 || t[0] != "log_alpha")
        r.error("expected log_alpha");
      l.log_alpha = r.to_double(t[1]);
    }
    if (!r.next_line(&t) || t.size() != 2 || t[0] != "bias_mode") r.error("expected bias_mode");
    l.bias_trainable = (t[1] == "trainable");
    if (!r.next_line(&t) || t.empty() || t[0] != "bias") r.error("expected bias");
    l.bias = r.read_vector(t, 1);
    if (l.kind == LayerKind::plus) l.plus.resize(m.channels);
    if (l.kind == LayerKind::plus_fixed) l.fixed_taps.resize(m.channels);
    if (l.kind == LayerKind::seq) l.seq.resize(m.channels);
    const int side = 2 * l.radius + 1;
    l.sub.assign(static_cast<std::size_t>(l.sub_block_count()),
                 Filter2D::Zero(side, side));
    int expected_channel_lines = m.channels * (l.kind == LayerKind::seq ? 2 : 1);
    int expected_sub = l.sub_block_count();
    while (expected_channel_lines > 0 || expected_sub > 0) {
      if (!r.next_line(&t)) r.error("unexpected end of layer");
      if (t[0] == "rho") {
        if (l.kind != LayerKind::plus || t.size() != 8) r.error("unexpected rho line");
        const long c = r.to_long(t[1]);
        for (int k = 0; k < 6; ++k) l.plus[c].rho[k] = r.to_double(t[2 + k]);
        --expected_channel_lines;
      } else if (t[0] == "taps") {
        if (l.kind != LayerKind::plus_fixed || t.size() != 7) r.error("unexpected taps line");
        const long c = r.to_long(t[1]);
        Eigen::VectorXd a(5);
        for (int k = 0; k < 5; ++k) a[k] = r.to_double(t[2 + k]);
        l.fixed_taps[c] = a;
        --expected_channel_lines;
      } else if (t[0] == "eta") {
        if (l.kind != LayerKind::seq || t.size() != 3) r.error("unexpected eta line");
        l.seq[r.to_long(t[1])].eta = r.to_double(t[2]);
        --expected_channel_lines;
      } else if (t[0] == "off") {
        if (l.kind != LayerKind::seq || t.size() < 3) r.error("unexpected off line");
        const long c = r.to_long(t[1]);
        l.seq[c].off = r.read_vector(t, 2);
        if (l.seq[c].off.size() != seq_tap_count(l.radius))
          r.error("seq tap count does not match radius");
        --expected_channel_lines;
      } else if (t[0] == "sub") {
        if (t.size() != static_cast<std::size_t>(3 + side * side))
          r.error("sub block tap count mismatch");
        const long i = r.to_long(t[1]), j = r.to_long(t[2]);
        if (i <= j || i >= m.channels) r.error("sub block must have i > j");
        Filter2D s(side, side);
        long k = 3;
        for (int rr = 0; rr < side; ++rr)
          for (int cc = 0; cc < side; ++cc) s(rr, cc) = r.to_double(t[k++]);
        l.sub[static_cast<std::size_t>(i * (i - 1) / 2 + j)] = std::move(s);
        --expected_sub;
      } else {
        r.error("unexpected line in layer: " + t[0]);
      }
    }
    if (!r.next_line(&t) || t[0] != "end_layer") r.error("expected end_layer");
    m.layers.push_back(std::move(l));
  }
  if (!r.next_line(&t) || t[0] != "end_model") r.error("expected end_model");
  m.validate();
  return m;
}

}  // namespace

void save_model(const std::string& path, const DgmrfModel& model) {
  std::ofstream out(path);
  if (!out) fail(Status::io_error, "cannot write " + path);
  write_model(out, model);
}

DgmrfModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open " + path);
  TokenReader r(path, in);
  return read_model(r);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) fail(Status::io_error, "cannot write " + path);
  write_model(out, ckpt.model);
  out << "variational\n";
  write_vector(out, "nu", ckpt.var.nu);
  write_vector(out, "log_s", ckpt.var.log_s);
  write_vector(out, "nu_beta", ckpt.var.nu_beta);
  write_vector(out, "log_s_beta", ckpt.var.log_s_beta);
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << " " << v << "\n";
  out << "end_checkpoint\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open " + path);
  TokenReader r(path, in);
  Checkpoint c;
  c.model = read_model(r);
  std::vector<std::string> t;
  if (!r.next_line(&t) || t[0] != "variational") r.error("expected variational section");
  if (!r.next_line(&t) || t[0] != "nu") r.error("expected nu");
  c.var.nu = r.read_vector(t, 1);
  if (!r.next_line(&t) || t[0] != "log_s") r.error("expected log_s");
  c.var.log_s = r.read_vector(t, 1);
  if (!r.next_line(&t) || t[0] != "nu_beta") r.error("expected nu_beta");
  c.var.nu_beta = r.read_vector(t, 1);
  if (!r.next_line(&t) || t[0] != "log_s_beta") r.error("expected log_s_beta");
  c.var.log_s_beta = r.read_vector(t, 1);
  while (r.next_line(&t)) {
    if (t[0] == "end_checkpoint") return c;
    if (t[0] != "meta" || t.size() < 3) r.error("expected meta key value");
    std::string val = t[2];
    for (std::size_t i = 3; i < t.size(); ++i) val += " " + t[i];
    c.meta[t[1]] = val;
  }
  r.error("missing end_checkpoint");
}

}  // namespace dgmrf
