#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace delta {

// Error taxonomy. Every failure surfaces as one of these so callers (and the
// CLI) can report a category plus a human-readable message.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};
struct InputError : std::runtime_error {
  explicit InputError(const std::string& m) : std::runtime_error("input error: " + m) {}
};
struct StateError : std::runtime_error {
  explicit StateError(const std::string& m) : std::runtime_error("state error: " + m) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error("numeric error: " + m) {}
};
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& m) : std::logic_error("contract violation: " + m) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error("io error: " + m) {}
};

inline void check_config(bool ok, const std::string& m) {
  if (!ok) throw ConfigError(m);
}
inline void check_input(bool ok, const std::string& m) {
  if (!ok) throw InputError(m);
}
inline void check_state(bool ok, const std::string& m) {
  if (!ok) throw StateError(m);
}
inline void check_contract(bool ok, const std::string& m) {
  if (!ok) throw ContractError(m);
}

}  // namespace delta
