#pragma once

#include <sstream>
#include <string>

namespace dronegate {

/// Concatenates streamable values into a string — the project's stand-in for
/// std::format, which this toolchain's standard library does not ship yet.
template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream out;
  (out << ... << args);
  return out.str();
}

}  // namespace dronegate
