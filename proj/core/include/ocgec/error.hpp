#pragma once

#include <stdexcept>
#include <string>

namespace ocgec {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A violated precondition on user-supplied configuration or input.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Mask plan indices that are duplicated or out of range.
class PlanError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Corrupt or truncated artifact file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A function evaluated to NaN or Inf where a finite value was required.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The one-class encoder mapped every training graph onto (nearly) one point.
class CollapseError : public Error {
 public:
  using Error::Error;
};

}  // namespace ocgec
