#pragma once

#include <stdexcept>
#include <string>

namespace earid {

/// Error categories. Values double as CLI exit codes and C-API status codes.
enum class Status : int {
  ok = 0,
  error = 1,           // anything not covered below
  invalid_config = 2,  // config/validation problems
  data_error = 3,      // bad or missing input data
  numeric_error = 4,   // non-finite values, unstable designs
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}

  Status status() const { return status_; }

 private:
  Status status_;
};

inline Error config_error(const std::string& what) {
  return Error(Status::invalid_config, what);
}
inline Error data_error(const std::string& what) {
  return Error(Status::data_error, what);
}
inline Error numeric_error(const std::string& what) {
  return Error(Status::numeric_error, what);
}

}  // namespace earid
