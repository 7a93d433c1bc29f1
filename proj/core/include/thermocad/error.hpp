#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thermocad {

/// Failure categories raised across the library. Each maps to one named
/// error condition of the public operations.
enum class Errc {
  // dataio
  MalformedMatrix,
  OutOfRange,
  MalformedMask,
  EmptyMask,
  SchemaError,
  DuplicatePatient,
  MissingFile,
  IoError,
  // imgproc
  DegenerateInput,
  OutOfRangeAngle,
  OutOfRangeFactor,
  EmptyDataset,
  // splitter
  RatioError,
  TooFewSamples,
  InsufficientPatients,
  SingleClassPart,
  // nn
  SpatialCollapse,
  InvalidHyperParams,
  ShapeMismatch,
  NonFiniteLoss,
  FormatError,
  ArchitectureMismatch,
  // metrics
  LengthMismatch,
  EmptyInput,
  SingleClass,
  // harness
  ConfigError,
  OutOfScope,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& what);

}  // namespace thermocad
