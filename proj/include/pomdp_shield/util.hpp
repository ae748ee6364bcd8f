#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pomdp_shield {

// Raised for malformed inputs and violated preconditions that a caller can act on.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(std::string const& what) : std::runtime_error(what) {}
};

// Raised when an enumeration or solve exceeds a configured cap. The CLI maps this to exit code 3.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(std::string const& what) : std::runtime_error(what) {}
};

inline void hash_combine(std::size_t& seed, std::size_t value) {
  seed ^= value + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2);
}

}  // namespace pomdp_shield
