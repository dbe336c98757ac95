#pragma once

#include <stdexcept>
#include <string>

namespace nh {

enum class ErrorCode {
  kInvalidArgument = 1,
  kDimensionMismatch = 2,
  kDomain = 3,       // input outside the regime where a quantity is defined
  kNumerical = 4,    // non-finite values, step-size collapse, non-convergence
  kIo = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace nh
