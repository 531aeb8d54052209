#include "runner.hpp"

#include "data_io.hpp"
#include "error.hpp"
#include "util.hpp"
#include "vi.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace dgmrf {

namespace fs = std::filesystem;

const std::string& Options::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) fail(Status::config_error, "missing option \"" + key + "\"");
  return it->second;
}

std::string Options::get_or(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Options::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key), &v))
    fail(Status::config_error, "option \"" + key + "\" is not a number");
  return v;
}

long Options::get_long(const std::string& key) const {
  long long v = 0;
  if (!parse_long(get(key), &v))
    fail(Status::config_error, "option \"" + key + "\" is not an integer");
  return static_cast<long>(v);
}

bool Options::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  fail(Status::config_error, "option \"" + key + "\" is not a boolean");
}

void Options::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Status::io_error, "cannot open config file " + path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << path << ":" << line_no << ": expected key=value";
      fail(Status::parse_error, os.str());
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Options::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(Status::io_error, "cannot write " + path);
  for (const auto& [k, v] : kv_) out << k << "=" << v << "\n";
}

namespace {

struct KeyDefault {
  const char* key;
  const char* value;  // nullptr = required-at-use, no default
};

const std::map<std::string, std::vector<KeyDefault>>& command_keys() {
  static const std::map<std::string, std::vector<KeyDefault>> keys = {
      {"gen-toy",
       {{"out", nullptr},
        {"H", "160"},
        {"W", "120"},
        {"kappa2", "0.0032"},
        {"tau", "1"},
        {"gamma", "1"},
        {"seed", "1"},
        {"miss_frac", "0.3"},
        {"holes", ""},
        {"edges", ""},
        {"cg_delta", "1e-07"}}},
      {"convert",
       {{"out", nullptr}, {"csv", nullptr}, {"H", "500"}, {"W", "300"}}},
      {"train",
       {{"out", nullptr},
        {"data", nullptr},
        {"covariates", ""},
        {"filter", "plus"},
        {"layers", "1"},
        {"radius", "0"},
        {"channels", "1"},
        {"prelu", "0"},
        {"channel_shift", "1"},
        {"iterations", "10000"},
        {"nq", "10"},
        {"lr", "0.01"},
        {"sigma", "0.001"},
        {"train_sigma", "0"},
        {"freeze_bias", "0"},
        {"init_sd", "0.1"},
        {"frame", "10"},
        {"normalize", "0"},
        {"trend", "0"},
        {"trend_v", "0.0001"},
        {"seed", "1"},
        {"checkpoint_every", "1000"}}},
      {"infer",
       {{"out", nullptr},
        {"checkpoint", nullptr},
        {"data", nullptr},
        {"covariates", ""},
        {"cg_delta", "1e-07"},
        {"cg_max_iter", "0"},
        {"var_method", "auto"},
        {"var_samples", "100"},
        {"seed", "1"}}},
      {"eval",
       {{"out", nullptr},
        {"truth", nullptr},
        {"data", ""},
        {"mask", ""},
        {"runs", ""},
        {"mean", ""},
        {"pred_sd", ""},
        {"alpha", "0.05"}}},
  };
  return keys;
}

void ensure_out_dir(const Options& opts) {
  const fs::path out(opts.get("out"));
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(Status::io_error, "cannot create output directory " + out.string());
}

std::string out_path(const Options& opts, const std::string& name) {
  return (fs::path(opts.get("out")) / name).string();
}

void write_resolved(const Options& opts) {
  opts.write_file(out_path(opts, "config.resolved"));
}

Dataset load_dataset(const std::string& data_path, const std::string& cov_path) {
  Dataset d = load_grid(data_path);
  if (!cov_path.empty()) d.covariates = load_covariates(cov_path);
  return d;
}

}  // namespace

void resolve_options(Options& opts, const std::string& subcommand) {
  const auto& keys = command_keys();
  auto it = keys.find(subcommand);
  if (it == keys.end())
    fail(Status::config_error, "unknown subcommand \"" + subcommand + "\"");
  std::set<std::string> known;
  for (const KeyDefault& kd : it->second) {
    known.insert(kd.key);
    if (!opts.has(kd.key) && kd.value) opts.set(kd.key, kd.value);
  }
  for (const auto& [k, v] : opts.all())
    if (!known.count(k))
      fail(Status::config_error,
           "unknown option \"" + k + "\" for subcommand " + subcommand);
}

void run_gen_toy(const Options& opts) {
  ensure_out_dir(opts);
  write_resolved(opts);
  ToyConfig cfg;
  cfg.H = static_cast<int>(opts.get_long("H"));
  cfg.W = static_cast<int>(opts.get_long("W"));
  cfg.kappa2 = opts.get_double("kappa2");
  cfg.tau = opts.get_double("tau");
  cfg.gamma = static_cast<int>(opts.get_long("gamma"));
  cfg.seed = static_cast<std::uint64_t>(opts.get_long("seed"));
  cfg.miss_fraction = opts.get_double("miss_frac");
  cfg.holes = parse_holes(opts.get("holes"));
  cfg.edges = parse_edges(opts.get("edges"));
  cfg.cg_delta = opts.get_double("cg_delta");
  GridTensor truth = add_edges(gen_matern(cfg), cfg.edges);
  const Mask mask = gen_mask(cfg);
  save_grid(out_path(opts, "truth.grid"), truth);
  save_grid(out_path(opts, "obs.grid"), truth, mask);
}

void run_convert(const Options& opts) {
  ensure_out_dir(opts);
  write_resolved(opts);
  const Dataset d = convert_lonlat_csv(opts.get("csv"),
                                       static_cast<int>(opts.get_long("H")),
                                       static_cast<int>(opts.get_long("W")));
  save_grid(out_path(opts, "obs.grid"), d.y, d.mask);
  save_covariates(out_path(opts, "covariates.grid"), *d.covariates, d.y.H, d.y.W);
}

Checkpoint train_from_options(const Dataset& data0, const Options& opts) {
  const int frame = static_cast<int>(opts.get_long("frame"));
  Dataset data = pad_frame(data0, frame);

  double scale = 1.0;
  if (opts.get_bool("normalize")) {
    scale = normalization_scale(data);
    data.y.values /= scale;
  }

  ModelSpec spec;
  const std::string filter = opts.get("filter");
  if (filter == "plus")
    spec.kind = LayerKind::plus;
  else if (filter == "seq")
    spec.kind = LayerKind::seq;
  else
    fail(Status::config_error, "filter must be plus or seq");
  spec.layers = static_cast<int>(opts.get_long("layers"));
  const long radius = opts.get_long("radius");
  spec.radius = radius > 0 ? static_cast<int>(radius)
                           : (spec.kind == LayerKind::seq ? 2 : 1);
  spec.channels = static_cast<int>(opts.get_long("channels"));
  spec.prelu = opts.get_bool("prelu");
  spec.channel_shift = static_cast<int>(opts.get_long("channel_shift"));
  spec.sigma = opts.get_double("sigma");
  spec.sigma_trainable = opts.get_bool("train_sigma");
  spec.bias_trainable = !opts.get_bool("freeze_bias");
  spec.init_sd = opts.get_double("init_sd");
  spec.seed = static_cast<std::uint64_t>(opts.get_long("seed"));
  const DgmrfModel model = random_init_model(spec);

  const bool trend = opts.get_bool("trend");
  if (trend && !data.covariates)
    fail(Status::config_error, "trend=1 requires a covariates grid");

  TrainConfig cfg;
  cfg.iterations = opts.get_long("iterations");
  cfg.nq = static_cast<int>(opts.get_long("nq"));
  cfg.lr = opts.get_double("lr");
  cfg.seed = static_cast<std::uint64_t>(opts.get_long("seed"));
  cfg.trend_v = opts.get_double("trend_v");
  cfg.trend_p = trend ? static_cast<int>(data.covariates->cols()) : 0;
  cfg.checkpoint_every = opts.get_long("checkpoint_every");

  Checkpoint ckpt;
  ckpt.meta["scale"] = format_double(scale);
  ckpt.meta["frame"] = std::to_string(frame);
  ckpt.meta["trend"] = trend ? "1" : "0";
  ckpt.meta["trend_v"] = format_double(cfg.trend_v);
  if (opts.has("out")) {
    const std::string ckpt_path = out_path(opts, "checkpoint.dgmrf");
    cfg.on_checkpoint = [&ckpt, ckpt_path](long, const DgmrfModel& m,
                                           const VariationalParams& v) {
      Checkpoint snap = ckpt;
      snap.model = m;
      snap.var = v;
      save_checkpoint(ckpt_path, snap);
    };
  }

  TrainResult res = train(model, data, cfg);
  ckpt.model = res.model;
  ckpt.var = res.var;

  if (opts.has("out")) {
    std::ofstream loss(out_path(opts, "loss.csv"));
    if (!loss) fail(Status::io_error, "cannot write loss.csv");
    loss << "iteration,loss\n";
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i)
      loss << i << "," << format_double(res.loss_trace[i]) << "\n";
  }
  return ckpt;
}

void run_train(const Options& opts) {
  ensure_out_dir(opts);
  write_resolved(opts);
  const Dataset data = load_dataset(opts.get("data"), opts.get("covariates"));
  const Checkpoint ckpt = train_from_options(data, opts);
  save_checkpoint(out_path(opts, "checkpoint.dgmrf"), ckpt);
}

PosteriorSummary infer_from_checkpoint(const Checkpoint& ckpt, const Dataset& data0,
                                       const Options& opts, GridTensor* mean,
                                       GridTensor* sd, GridTensor* pred_sd) {
  long long frame = 10;
  parse_long(ckpt.meta.count("frame") ? ckpt.meta.at("frame") : "10", &frame);
  double scale = 1.0;
  if (ckpt.meta.count("scale")) parse_double(ckpt.meta.at("scale"), &scale);
  const bool trend = ckpt.meta.count("trend") && ckpt.meta.at("trend") == "1";
  double trend_v = 1e-4;
  if (ckpt.meta.count("trend_v")) parse_double(ckpt.meta.at("trend_v"), &trend_v);

  Dataset data = pad_frame(data0, static_cast<int>(frame));
  data.y.values /= scale;
  if (ckpt.var.nu.size() != data.y.size())
    fail(Status::dimension_mismatch,
         "infer: checkpoint was trained on a different grid shape");

  SummarizeConfig cfg;
  cfg.cg_delta = opts.get_double("cg_delta");
  cfg.cg_max_iter = opts.get_long("cg_max_iter");
  cfg.var_samples = static_cast<int>(opts.get_long("var_samples"));
  cfg.seed = static_cast<std::uint64_t>(opts.get_long("seed"));
  cfg.trend = trend;
  cfg.trend_v = trend_v;
  const std::string method = opts.get("var_method");
  if (method == "rbmc")
    cfg.method = SummarizeConfig::Method::rbmc;
  else if (method == "mc")
    cfg.method = SummarizeConfig::Method::mc;
  else if (method == "auto")
    cfg.method = SummarizeConfig::Method::automatic;
  else
    fail(Status::config_error, "var_method must be auto, rbmc or mc");

  PosteriorSummary summary = summarize(ckpt.model, ckpt.var, data, cfg);
  const int fw = static_cast<int>(frame);
  *mean = crop_frame(summary.mean, fw);
  *sd = crop_frame(summary.marginal_sd, fw);
  *pred_sd = crop_frame(summary.predictive_sd, fw);
  mean->values *= scale;
  sd->values *= scale;
  pred_sd->values *= scale;
  if (summary.beta_mean.size() > 0) {
    summary.beta_mean *= scale;
    summary.beta_sd *= scale;
  }
  return summary;
}

void run_infer(const Options& opts) {
  ensure_out_dir(opts);
  write_resolved(opts);
  const Checkpoint ckpt = load_checkpoint(opts.get("checkpoint"));
  const Dataset data = load_dataset(opts.get("data"), opts.get("covariates"));
  GridTensor mean, sd, pred_sd;
  const PosteriorSummary summary =
      infer_from_checkpoint(ckpt, data, opts, &mean, &sd, &pred_sd);
  save_grid(out_path(opts, "mean.grid"), mean);
  save_grid(out_path(opts, "sd.grid"), sd);
  save_grid(out_path(opts, "pred_sd.grid"), pred_sd);
  std::ofstream meta(out_path(opts, "summary.meta"));
  if (!meta) fail(Status::io_error, "cannot write summary.meta");
  meta << "method=" << summary.method << "\n";
  meta << "cg_delta=" << format_double(summary.cg_delta) << "\n";
  meta << "cg_iterations=" << summary.cg_iterations << "\n";
  meta << "samples=" << summary.samples_used << "\n";
  if (summary.beta_mean.size() > 0) {
    meta << "beta_mean=";
    for (long i = 0; i < summary.beta_mean.size(); ++i)
      meta << (i ? " " : "") << format_double(summary.beta_mean[i]);
    meta << "\nbeta_sd=";
    for (long i = 0; i < summary.beta_sd.size(); ++i)
      meta << (i ? " " : "") << format_double(summary.beta_sd[i]);
    meta << "\n";
  }
}

Mask derive_test_mask(const Dataset& truth, const Dataset& obs) {
  if (truth.y.H != obs.y.H || truth.y.W != obs.y.W)
    fail(Status::dimension_mismatch, "test mask: truth/observation shape mismatch");
  Mask test(truth.y.H, truth.y.W, 0);
  for (int r = 0; r < test.H; ++r)
    for (int c = 0; c < test.W; ++c)
      test.set(r, c, truth.mask.at(r, c) && !obs.mask.at(r, c) ? 1 : 0);
  return test;
}

ScoreReport eval_grids(const GridTensor& truth, const Mask& test,
                       const GridTensor& mean, const GridTensor& pred_sd,
                       double alpha) {
  return score_summary(truth, mean, pred_sd, test, alpha);
}

void run_eval(const Options& opts) {
  ensure_out_dir(opts);
  write_resolved(opts);
  const Dataset truth = load_grid(opts.get("truth"));
  Mask test;
  if (!opts.get("mask").empty()) {
    const Dataset m = load_grid(opts.get("mask"));
    if (m.y.H != truth.y.H || m.y.W != truth.y.W)
      fail(Status::dimension_mismatch, "eval: mask grid shape mismatch");
    test = m.mask;
  } else if (!opts.get("data").empty()) {
    test = derive_test_mask(truth, load_grid(opts.get("data")));
  } else {
    fail(Status::config_error, "eval: need data= or mask= to define test pixels");
  }
  const double alpha = opts.get_double("alpha");

  struct Row {
    std::string label;
    ScoreReport rep;
  };
  std::vector<Row> rows;
  if (!opts.get("runs").empty()) {
    for (const std::string& dir : split(opts.get("runs"), ';')) {
      if (trim(dir).empty()) continue;
      const Dataset mean = load_grid((fs::path(dir) / "mean.grid").string());
      const Dataset psd = load_grid((fs::path(dir) / "pred_sd.grid").string());
      rows.push_back({fs::path(dir).filename().string(),
                      eval_grids(truth.y, test, mean.y, psd.y, alpha)});
    }
  } else {
    if (opts.get("mean").empty() || opts.get("pred_sd").empty())
      fail(Status::config_error, "eval: need runs= or mean=/pred_sd=");
    const Dataset mean = load_grid(opts.get("mean"));
    const Dataset psd = load_grid(opts.get("pred_sd"));
    rows.push_back({"run", eval_grids(truth.y, test, mean.y, psd.y, alpha)});
  }
  if (rows.empty()) fail(Status::config_error, "eval: no runs given");

  std::ofstream out(out_path(opts, "scores.csv"));
  if (!out) fail(Status::io_error, "cannot write scores.csv");
  out << "label,MAE,RMSE,CRPS,INT,CVG,n\n";
  auto emit = [&out](const std::string& label, double mae, double rmse, double crps,
                     double intv, double cvg, long n) {
    out << label << "," << format_double(mae) << "," << format_double(rmse) << ","
        << format_double(crps) << "," << format_double(intv) << ","
        << format_double(cvg) << "," << n << "\n";
  };
  for (const Row& r : rows)
    emit(r.label, r.rep.mae, r.rep.rmse, r.rep.crps, r.rep.interval, r.rep.coverage,
         r.rep.n_scored);
  if (rows.size() > 1) {
    const double n = static_cast<double>(rows.size());
    auto stat = [&](auto getter) {
      double m = 0.0, s = 0.0;
      for (const Row& r : rows) m += getter(r.rep);
      m /= n;
      for (const Row& r : rows) s += (getter(r.rep) - m) * (getter(r.rep) - m);
      s = std::sqrt(s / (n - 1.0));
      return std::pair<double, double>(m, s);
    };
    const auto mae = stat([](const ScoreReport& r) { return r.mae; });
    const auto rmse = stat([](const ScoreReport& r) { return r.rmse; });
    const auto crps = stat([](const ScoreReport& r) { return r.crps; });
    const auto intv = stat([](const ScoreReport& r) { return r.interval; });
    const auto cvg = stat([](const ScoreReport& r) { return r.coverage; });
    emit("mean", mae.first, rmse.first, crps.first, intv.first, cvg.first,
         rows[0].rep.n_scored);
    emit("sd", mae.second, rmse.second, crps.second, intv.second, cvg.second,
         rows[0].rep.n_scored);
  }
}

}  // namespace dgmrf
