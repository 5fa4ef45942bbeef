#pragma once

#include <stdexcept>
#include <string>

namespace wbs {

enum class ErrorKind {
  InvalidArgument,
  Io,
  BehindCamera,
  DegenerateRig,
  FrustumMiss,
  InsufficientVisibility,
  SupportExhausted,
  MagicMismatch,
  Truncation,
  Checksum,
  ShapeMismatch,
  DisparityRangeEmpty,
  MaskSizeMismatch,
  EmptyEvaluation,
  NonPositiveGroundTruth,
  MissingWeights,
  Invariant,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this exception; the kind lets
// callers (the CLI in particular) map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace wbs
