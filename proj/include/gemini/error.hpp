#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace gemini {

// Bad input data or arguments. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string &what) : std::runtime_error(what) {}
};

// Filesystem failures. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string &what) : std::runtime_error(what) {}
};

// Misuse of stateful objects, e.g. backward() without a preceding forward().
class StateError : public std::logic_error {
public:
  explicit StateError(const std::string &what) : std::logic_error(what) {}
};

namespace detail {

template <typename... Args>
std::string sprintf(const char *fmt, Args &&...args) {
  int n = std::snprintf(nullptr, 0, fmt, std::forward<Args>(args)...);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::snprintf(out.data(), out.size() + 1, fmt, std::forward<Args>(args)...);
  return out;
}

// 17 significant digits, enough to read back bit-identical.
inline std::string format_double(double x) { return sprintf("%.17g", x); }

} // namespace detail
} // namespace gemini
