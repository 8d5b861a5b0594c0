#pragma once

#include <stdexcept>
#include <string>

namespace far3d {

// Invalid geometry handed to a geometric kernel (zero-area box, frame mismatch).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file is not well-formed JSON. The message carries line/column context.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input is well-formed but violates a model invariant. The message names the token.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace far3d
