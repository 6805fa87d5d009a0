#pragma once

#include <stdexcept>
#include <string>

namespace peddet {

// Structural problems: tensor extents that do not line up.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text or binary input (config lines, file magic, truncated data).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures (missing path, unreadable file).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A structurally valid input that violates a model invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace peddet
