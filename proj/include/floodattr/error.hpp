#pragma once

#include <stdexcept>
#include <string>

namespace floodattr {

enum class ErrorCode {
  InvalidArgument,
  Domain,
  Validation,
  Config,
  Io,
  Initialization,
  Sampler,
};

// Single exception type for the library; the code maps one-to-one onto the
// status values of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace floodattr
