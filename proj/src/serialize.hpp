#pragma once

#include "model.hpp"
#include "params.hpp"

#include <map>
#include <string>

namespace dgmrf {

// Fitted parameters plus run metadata (normalization scale, frame width,
// trend settings) needed to reproduce inference.
struct Checkpoint {
  DgmrfModel model;
  VariationalParams var;
  std::map<std::string, std::string> meta;
};

// Flat text manifest: layer kind, radius, orientation, channel plan and raw
// unconstrained parameters at 17 significant digits (bit-exact round trip).
void save_model(const std::string& path, const DgmrfModel& model);
DgmrfModel load_model(const std::string& path);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dgmrf
