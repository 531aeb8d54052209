#pragma once

#include "grid.hpp"
#include "metrics.hpp"
#include "posterior.hpp"
#include "serialize.hpp"

#include <map>
#include <string>

namespace dgmrf {

// Flat key=value settings with per-subcommand defaults. Precedence is
// CLI flag > config file > default; every run writes the fully resolved
// set next to its outputs so runs are reconstructible.
class Options {
public:
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  void load_file(const std::string& path);   // "key = value" lines, # comments
  void write_file(const std::string& path) const;  // sorted key=value lines

  const std::map<std::string, std::string>& all() const { return kv_; }

private:
  std::map<std::string, std::string> kv_;
};

// Fills defaults for the subcommand and rejects unknown keys.
void resolve_options(Options& opts, const std::string& subcommand);

// Batch commands; each creates opts["out"], writes config.resolved there,
// and produces the artifacts described below.
void run_gen_toy(const Options& opts);   // truth.grid, obs.grid
void run_convert(const Options& opts);   // obs.grid, covariates.grid
void run_train(const Options& opts);     // checkpoint.dgmrf, loss.csv
void run_infer(const Options& opts);     // mean.grid, sd.grid, pred_sd.grid, summary.meta
void run_eval(const Options& opts);      // scores.csv

// Pieces shared with the C API.
struct TrainInputs {
  Dataset data;
  int frame = 10;
  bool normalize = false;
};

Checkpoint train_from_options(const Dataset& data, const Options& opts);
PosteriorSummary infer_from_checkpoint(const Checkpoint& ckpt, const Dataset& data,
                                       const Options& opts, GridTensor* mean,
                                       GridTensor* sd, GridTensor* pred_sd);
ScoreReport eval_grids(const GridTensor& truth, const Mask& test,
                       const GridTensor& mean, const GridTensor& pred_sd,
                       double alpha);

// Test mask: pixels observed in the truth grid but missing in the
// observations (or the observed pixels of an explicit mask grid).
Mask derive_test_mask(const Dataset& truth, const Dataset& obs);

}  // namespace dgmrf
