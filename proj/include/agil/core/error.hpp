#pragma once

#include <stdexcept>
#include <string>

namespace agil {

// Violated precondition or API misuse (shape mismatch, backward without
// forward, invalid label, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Numerical failure that must not propagate silently (NaN/Inf in gradients,
// non-finite actions, degenerate inputs).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

inline void require_finite(double x, const std::string& msg) {
  if (!std::isfinite(x)) throw NumericError(msg);
}

}  // namespace agil
