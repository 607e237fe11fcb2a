#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pslab {

// Error hierarchy. The CLI maps these onto exit codes, so new error sites
// should pick the most specific type that applies.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-facing configuration (unknown keys, invalid values).
struct ConfigError : Error {
  using Error::Error;
};

// Incompatible tensor/model shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A command applied to the wrong kind of artifact (e.g. visualizing a
// depth checkpoint as a mask model).
struct ModeError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

namespace detail {
[[noreturn]] inline void throw_shape(const std::string& msg) { throw ShapeError(msg); }
}  // namespace detail

#define PSLAB_CHECK(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) {                                               \
      std::ostringstream oss_;                                   \
      oss_ << msg;                                               \
      throw ::pslab::Error(oss_.str());                          \
    }                                                            \
  } while (0)

#define PSLAB_CHECK_SHAPE(cond, msg)                             \
  do {                                                           \
    if (!(cond)) {                                               \
      std::ostringstream oss_;                                   \
      oss_ << msg;                                               \
      throw ::pslab::ShapeError(oss_.str());                     \
    }                                                            \
  } while (0)

// Finite-value checks on tensor data are on by default in debug builds and
// can be toggled at runtime (tests exercise both states).
bool debug_checks_enabled();
void set_debug_checks(bool on);

}  // namespace pslab
