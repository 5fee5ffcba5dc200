#pragma once

#include <stdexcept>
#include <string>

namespace scenefit {

/// Thrown for every validation or numerical failure in the library.
/// Messages name the failing input (path, field, index) where one exists.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace scenefit
