#pragma once

#include <stdexcept>
#include <string>

namespace dgmrf {

enum class Status {
  ok = 0,
  invalid_argument = 1,
  dimension_mismatch = 2,
  io_error = 3,
  parse_error = 4,
  config_error = 5,
  convergence_failure = 6,
  non_finite = 7,
  unsupported = 8,
};

inline const char* status_name(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::invalid_argument: return "invalid_argument";
    case Status::dimension_mismatch: return "dimension_mismatch";
    case Status::io_error: return "io_error";
    case Status::parse_error: return "parse_error";
    case Status::config_error: return "config_error";
    case Status::convergence_failure: return "convergence_failure";
    case Status::non_finite: return "non_finite";
    case Status::unsupported: return "unsupported";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}

  Status status() const { return status_; }

private:
  Status status_;
};

[[noreturn]] inline void fail(Status status, const std::string& what) {
  throw Error(status, what);
}

}  // namespace dgmrf
