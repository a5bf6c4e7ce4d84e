#pragma once

#include <stdexcept>
#include <string>

namespace cbpoison {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  zero_denominator,
  no_admissible_threshold,
  witness_unavailable,
  unknown_preset,
};

/// Error raised by library operations. Structural problems (bad shapes,
/// out-of-range hyperparameters) and domain failures share this type and are
/// told apart by code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool condition, const std::string& what, Errc code = Errc::invalid_argument) {
  if (!condition) throw Error(code, what);
}

}  // namespace cbpoison
