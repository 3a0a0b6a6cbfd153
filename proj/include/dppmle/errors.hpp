#pragma once

#include <stdexcept>
#include <string>

namespace dppmle {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A point outside the open parameter space (a vanishing minor or Q_n = 0),
// or a nonpositive probability vector.
struct DomainError : Error {
  using Error::Error;
};

struct RankError : Error {
  using Error::Error;
};

struct KernelError : Error {
  using Error::Error;
};

struct SeedFailure : Error {
  using Error::Error;
};

struct NoRealSolution : Error {
  using Error::Error;
};

struct DegenerateInstance : Error {
  using Error::Error;
};

// Malformed input file or inline argument.
struct SchemaError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dppmle
