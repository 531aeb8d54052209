#include <dgmrf/dgmrf.h>

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::path("capi_tmp") / name;
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("opts: set/get/resolve/write") {
  dgmrf_opts* o = nullptr;
  REQUIRE(dgmrf_opts_create(&o) == DGMRF_OK);
  CHECK(dgmrf_opts_get(o, "seed") == nullptr);
  CHECK(dgmrf_opts_set(o, "seed", "7") == DGMRF_OK);
  CHECK(std::strcmp(dgmrf_opts_get(o, "seed"), "7") == 0);
  CHECK(dgmrf_opts_set(o, "out", tmp_dir("opts").c_str()) == DGMRF_OK);
  CHECK(dgmrf_opts_resolve(o, "gen-toy") == DGMRF_OK);
  CHECK(std::strcmp(dgmrf_opts_get(o, "H"), "160") == 0);  // default filled
  CHECK(std::strcmp(dgmrf_opts_get(o, "seed"), "7") == 0);  // override kept

  dgmrf_opts* bad = nullptr;
  REQUIRE(dgmrf_opts_create(&bad) == DGMRF_OK);
  CHECK(dgmrf_opts_set(bad, "no_such_key", "1") == DGMRF_OK);
  CHECK(dgmrf_opts_resolve(bad, "gen-toy") == DGMRF_ERR_CONFIG);
  CHECK(std::string(dgmrf_last_error()).find("no_such_key") != std::string::npos);
  CHECK(dgmrf_opts_resolve(bad, "frobnicate") == DGMRF_ERR_CONFIG);
  dgmrf_opts_free(bad);
  dgmrf_opts_free(o);
}

TEST_CASE("grid handles round-trip values with NaN as missing") {
  std::vector<double> vals = {1.0, std::nan(""), 3.0, 4.0, 5.0, 6.0};
  dgmrf_grid* g = nullptr;
  REQUIRE(dgmrf_grid_create(2, 3, 1, vals.data(), &g) == DGMRF_OK);
  int32_t h = 0, w = 0, c = 0;
  CHECK(dgmrf_grid_dims(g, &h, &w, &c) == DGMRF_OK);
  CHECK(h == 2);
  CHECK(w == 3);
  CHECK(c == 1);
  std::vector<double> back(6);
  CHECK(dgmrf_grid_values(g, back.data(), back.size()) == DGMRF_OK);
  CHECK(back[0] == 1.0);
  CHECK(std::isnan(back[1]));
  CHECK(back[5] == 6.0);
  CHECK(dgmrf_grid_values(g, back.data(), 3) == DGMRF_ERR_INVALID_ARGUMENT);

  const std::string path = tmp_dir("grids") + "/g.grid";
  CHECK(dgmrf_grid_save(g, path.c_str()) == DGMRF_OK);
  dgmrf_grid* loaded = nullptr;
  CHECK(dgmrf_grid_load(path.c_str(), &loaded) == DGMRF_OK);
  std::vector<double> again(6);
  CHECK(dgmrf_grid_values(loaded, again.data(), again.size()) == DGMRF_OK);
  CHECK(again[0] == 1.0);
  CHECK(std::isnan(again[1]));
  dgmrf_grid_free(loaded);
  dgmrf_grid_free(g);

  CHECK(dgmrf_grid_load("no/such/file.grid", &loaded) == DGMRF_ERR_IO);
  CHECK(std::strlen(dgmrf_last_error()) > 0);
}

TEST_CASE("status names are stable identifiers") {
  CHECK(std::strcmp(dgmrf_status_name(DGMRF_OK), "DGMRF_OK") == 0);
  CHECK(std::strcmp(dgmrf_status_name(DGMRF_ERR_PARSE), "DGMRF_ERR_PARSE") == 0);
}

TEST_CASE("end-to-end through the C API: gen, train, infer, eval") {
  const std::string dir = tmp_dir("pipeline");

  // Tiny toy problem.
  dgmrf_opts* gen = nullptr;
  REQUIRE(dgmrf_opts_create(&gen) == DGMRF_OK);
  dgmrf_opts_set(gen, "out", dir.c_str());
  dgmrf_opts_set(gen, "H", "12");
  dgmrf_opts_set(gen, "W", "12");
  dgmrf_opts_set(gen, "kappa2", "0.2");
  dgmrf_opts_set(gen, "miss_frac", "0.3");
  dgmrf_opts_set(gen, "seed", "3");
  REQUIRE(dgmrf_opts_resolve(gen, "gen-toy") == DGMRF_OK);
  REQUIRE(dgmrf_run_gen_toy(gen) == DGMRF_OK);
  CHECK(std::filesystem::exists(dir + "/truth.grid"));
  CHECK(std::filesystem::exists(dir + "/obs.grid"));
  CHECK(std::filesystem::exists(dir + "/config.resolved"));
  dgmrf_opts_free(gen);

  dgmrf_grid* obs = nullptr;
  REQUIRE(dgmrf_grid_load((dir + "/obs.grid").c_str(), &obs) == DGMRF_OK);

  // Train a small model on handles.
  dgmrf_opts* topts = nullptr;
  REQUIRE(dgmrf_opts_create(&topts) == DGMRF_OK);
  dgmrf_opts_set(topts, "iterations", "60");
  dgmrf_opts_set(topts, "nq", "2");
  dgmrf_opts_set(topts, "frame", "2");
  dgmrf_opts_set(topts, "seed", "4");
  dgmrf_opts_set(topts, "data", "unused");
  dgmrf_opts_set(topts, "out", tmp_dir("pipeline_train").c_str());
  dgmrf_model* model = nullptr;
  REQUIRE(dgmrf_train(obs, nullptr, topts, &model) == DGMRF_OK);

  const std::string ckpt = dir + "/ckpt.dgmrf";
  CHECK(dgmrf_model_save(model, ckpt.c_str()) == DGMRF_OK);
  dgmrf_model* reloaded = nullptr;
  CHECK(dgmrf_model_load(ckpt.c_str(), &reloaded) == DGMRF_OK);

  // Inference through the reloaded handle.
  dgmrf_opts* iopts = nullptr;
  REQUIRE(dgmrf_opts_create(&iopts) == DGMRF_OK);
  dgmrf_opts_set(iopts, "var_samples", "20");
  dgmrf_opts_set(iopts, "checkpoint", "unused");
  dgmrf_opts_set(iopts, "data", "unused");
  dgmrf_opts_set(iopts, "out", tmp_dir("pipeline_infer").c_str());
  dgmrf_summary* summary = nullptr;
  REQUIRE(dgmrf_infer(reloaded, obs, nullptr, iopts, &summary) == DGMRF_OK);
  CHECK(std::string(dgmrf_summary_meta(summary)).find("method=cg+rbmc") !=
        std::string::npos);

  dgmrf_grid* mean = nullptr;
  dgmrf_grid* pred_sd = nullptr;
  REQUIRE(dgmrf_summary_grid(summary, "mean", &mean) == DGMRF_OK);
  REQUIRE(dgmrf_summary_grid(summary, "pred_sd", &pred_sd) == DGMRF_OK);
  int32_t h = 0, w = 0, c = 0;
  dgmrf_grid_dims(mean, &h, &w, &c);
  CHECK(h == 12);  // frame cropped back
  CHECK(w == 12);
  dgmrf_grid* nothing = nullptr;
  CHECK(dgmrf_summary_grid(summary, "bogus", &nothing) ==
        DGMRF_ERR_INVALID_ARGUMENT);

  // Scores against the truth at held-out pixels.
  dgmrf_grid* truth = nullptr;
  REQUIRE(dgmrf_grid_load((dir + "/truth.grid").c_str(), &truth) == DGMRF_OK);
  dgmrf_scores scores{};
  REQUIRE(dgmrf_eval(truth, obs, mean, pred_sd, &scores) == DGMRF_OK);
  CHECK(scores.n_scored > 0);
  CHECK(scores.mae <= scores.rmse);
  CHECK(scores.coverage >= 0.0);
  CHECK(scores.coverage <= 1.0);

  dgmrf_grid_free(truth);
  dgmrf_grid_free(mean);
  dgmrf_grid_free(pred_sd);
  dgmrf_summary_free(summary);
  dgmrf_model_free(reloaded);
  dgmrf_model_free(model);
  dgmrf_opts_free(iopts);
  dgmrf_opts_free(topts);
  dgmrf_grid_free(obs);
}

TEST_CASE("run-level determinism: identical options give identical bytes") {
  for (const char* which : {"a", "b"}) {
    const std::string dir = tmp_dir(std::string("det_") + which);
    dgmrf_opts* o = nullptr;
    REQUIRE(dgmrf_opts_create(&o) == DGMRF_OK);
    dgmrf_opts_set(o, "out", dir.c_str());
    dgmrf_opts_set(o, "H", "10");
    dgmrf_opts_set(o, "W", "9");
    dgmrf_opts_set(o, "seed", "11");
    dgmrf_opts_set(o, "edges", "v:4:2.0");
    REQUIRE(dgmrf_opts_resolve(o, "gen-toy") == DGMRF_OK);
    REQUIRE(dgmrf_run_gen_toy(o) == DGMRF_OK);
    dgmrf_opts_free(o);
  }
  CHECK(slurp(tmp_dir("det_a") + "/truth.grid") ==
        slurp(tmp_dir("det_b") + "/truth.grid"));
  CHECK(slurp(tmp_dir("det_a") + "/obs.grid") ==
        slurp(tmp_dir("det_b") + "/obs.grid"));
  // Resolved configs agree except for the output directory itself.
  const std::string cfg = slurp(tmp_dir("det_a") + "/config.resolved");
  CHECK(cfg.find("kappa2=0.0032") != std::string::npos);
  CHECK(cfg.find("miss_frac=0.3") != std::string::npos);
}
