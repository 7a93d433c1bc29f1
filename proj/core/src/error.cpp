#include "thermocad/error.hpp"

namespace thermocad {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedMatrix: return "MalformedMatrix";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MalformedMask: return "MalformedMask";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::SchemaError: return "SchemaError";
    case Errc::DuplicatePatient: return "DuplicatePatient";
    case Errc::MissingFile: return "MissingFile";
    case Errc::IoError: return "IoError";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::OutOfRangeAngle: return "OutOfRangeAngle";
    case Errc::OutOfRangeFactor: return "OutOfRangeFactor";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::RatioError: return "RatioError";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::InsufficientPatients: return "InsufficientPatients";
    case Errc::SingleClassPart: return "SingleClassPart";
    case Errc::SpatialCollapse: return "SpatialCollapse";
    case Errc::InvalidHyperParams: return "InvalidHyperParams";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::FormatError: return "FormatError";
    case Errc::ArchitectureMismatch: return "ArchitectureMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::SingleClass: return "SingleClass";
    case Errc::ConfigError: return "ConfigError";
    case Errc::OutOfScope: return "OutOfScope";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace thermocad
