#pragma once

#include <stdexcept>
#include <string>

namespace difftopo {

// Base class of all library errors. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input / construction problems.
struct ParseError : Error { using Error::Error; };
struct TopologyError : Error { using Error::Error; };
struct DegeneracyError : Error { using Error::Error; };
struct InvalidParameter : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// Layer field bookkeeping.
struct EmptySeed : Error { using Error::Error; };
struct ZeroColumn : Error { using Error::Error; };
struct InvalidSplit : Error { using Error::Error; };
struct InvalidMerge : Error { using Error::Error; };

// Runtime failures of the numerical passes.
struct NumericalBlowup : Error { using Error::Error; };
struct MaxStepsExceeded : Error { using Error::Error; };
struct Unreachable : Error { using Error::Error; };
struct StallError : Error { using Error::Error; };
struct LoopError : Error { using Error::Error; };
struct InconsistentLog : Error { using Error::Error; };

}  // namespace difftopo
