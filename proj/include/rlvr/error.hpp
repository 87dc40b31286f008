#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlvr {

enum class ErrorCode {
  invalid_input,
  ill_posed_task,
  wrong_mode,
  wrong_regime,
  degenerate_bound,
  integration_diverged,
  training_diverged,
  provenance,
  parse,
  validation,
  not_found,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::ill_posed_task: return "ill-posed-task";
    case ErrorCode::wrong_mode: return "wrong-mode";
    case ErrorCode::wrong_regime: return "wrong-regime";
    case ErrorCode::degenerate_bound: return "degenerate-bound";
    case ErrorCode::integration_diverged: return "integration-diverged";
    case ErrorCode::training_diverged: return "training-diverged";
    case ErrorCode::provenance: return "provenance";
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace rlvr
