#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mortgee {

/// Error codes are stable strings: the CLI prints them as `CODE: message`
/// on a single line and exits 1, so scripts can match on the prefix.
namespace errc {
inline constexpr const char* io = "E_IO";
inline constexpr const char* missing_column = "E_MISSING_COLUMN";
inline constexpr const char* bad_value = "E_BAD_VALUE";
inline constexpr const char* duplicate_key = "E_DUPLICATE_KEY";
inline constexpr const char* empty_input = "E_EMPTY_INPUT";
inline constexpr const char* inconsistent_panel = "E_INCONSISTENT_PANEL";
inline constexpr const char* missing_exposure = "E_MISSING_EXPOSURE";
inline constexpr const char* ragged_panel = "E_RAGGED_PANEL";
inline constexpr const char* kt_coverage = "E_KT_COVERAGE";
inline constexpr const char* unknown_level = "E_UNKNOWN_LEVEL";
inline constexpr const char* singular = "E_SINGULAR";
inline constexpr const char* no_convergence = "E_NO_CONVERGENCE";
inline constexpr const char* not_positive_definite = "E_NOT_POSITIVE_DEFINITE";
inline constexpr const char* insufficient_pairs = "E_INSUFFICIENT_PAIRS";
inline constexpr const char* unbalanced = "E_UNBALANCED";
inline constexpr const char* dimension = "E_DIMENSION";
inline constexpr const char* not_converged = "E_NOT_CONVERGED";
inline constexpr const char* design_mismatch = "E_DESIGN_MISMATCH";
inline constexpr const char* column_mismatch = "E_COLUMN_MISMATCH";
inline constexpr const char* too_short = "E_TOO_SHORT";
inline constexpr const char* config = "E_CONFIG";
}  // namespace errc

class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const char* code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mortgee
