#pragma once

#include <stdexcept>
#include <string>

namespace jarn {

// Violated operation precondition: bad shapes, bad arguments, malformed files.
// The CLI maps this to exit code 2.
class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

// Shape mismatch between operands; a PreconditionError that carries the
// offending op name and shapes in its message.
class ShapeError : public PreconditionError {
 public:
  explicit ShapeError(const std::string& what) : PreconditionError(what) {}
};

// Non-finite loss or similar numerical breakdown during training.
// The CLI maps this to exit code 3.
class NumericalAbort : public std::runtime_error {
 public:
  explicit NumericalAbort(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure, annotated with the path involved.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace jarn
