#pragma once

#include <stdexcept>
#include <string>

namespace svkit {

/// Raised for every precondition, shape or data-format violation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check(bool condition, const char* message) {
  if (!condition) throw Error(message);
}

inline void check(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace svkit
