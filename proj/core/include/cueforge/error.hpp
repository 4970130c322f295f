#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cueforge {

enum class ErrorKind {
  // I/O
  MissingFile,
  IoError,
  // data / schema
  SchemaError,
  DimensionMismatch,
  ShapeMismatch,
  ResolutionMismatch,
  DimMismatch,
  // parameters
  InvalidParameter,
  BadKernel,
  BadSpec,
  BadCueSet,
  WrongColorSpace,
  EmptyColorCarrier,
  TooManySeeds,
  EmptyBins,
  // data-dependent failures
  NoLabeledPixels,
  DegeneratePatch,
  NoPatchesForClass,
  MissingClassTextures,
  AllUndefined,
  EmptyDataset,
  MissingInput,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Exception type for every recoverable failure raised by the library.
/// The kind lets callers (notably the CLI) map failures to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures caused by the filesystem rather than by data or parameters.
  bool is_io() const noexcept {
    return kind_ == ErrorKind::MissingFile || kind_ == ErrorKind::IoError ||
           kind_ == ErrorKind::MissingInput;
  }

 private:
  ErrorKind kind_;
};

}  // namespace cueforge
