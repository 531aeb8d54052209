#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dgmrf {

// Decimal formatting used by every text format in the project. 17 significant
// digits round-trip an IEEE double exactly; NaN is spelled "NaN".
std::string format_double(double v);

// Strict double parser. Accepts "NaN"/"nan" and infinities; rejects trailing
// garbage. Returns false on malformed input.
bool parse_double(const std::string& token, double* out);

bool parse_long(const std::string& token, long long* out);

// Splits on any run of spaces/tabs.
std::vector<std::string> split_ws(const std::string& line);

std::vector<std::string> split(const std::string& s, char sep);

std::string trim(const std::string& s);

// Seeded normal/uniform stream. One stream per logical consumer keeps draws
// reproducible regardless of what other components do.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  std::uint64_t next_u64() { return gen_(); }

private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Derives a decorrelated child seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dgmrf
