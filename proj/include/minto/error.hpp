#pragma once

#include <stdexcept>
#include <string>

namespace minto {

/// Raised when a caller violates an operation's precondition (hard error).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Raised when numerical state becomes unusable (NaN, divergence).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace minto
