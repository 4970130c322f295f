#include "cueforge/rng.hpp"

#include <limits>
#include <unordered_set>

#include "cueforge/error.hpp"

namespace cueforge {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidParameter, "Rng::below requires n > 0");
  // Rejection sampling on the top of the range to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::vector<std::uint64_t> Rng::sample_without_replacement(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw Error(ErrorKind::InvalidParameter, "cannot draw more samples than population");
  std::vector<std::uint64_t> out;
  out.reserve(k);
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(k * 2);
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uint64_t t = below(j + 1);
    if (taken.contains(t)) t = j;
    taken.insert(t);
    out.push_back(t);
  }
  return out;
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::BadKernel: return "BadKernel";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::BadCueSet: return "BadCueSet";
    case ErrorKind::WrongColorSpace: return "WrongColorSpace";
    case ErrorKind::EmptyColorCarrier: return "EmptyColorCarrier";
    case ErrorKind::TooManySeeds: return "TooManySeeds";
    case ErrorKind::EmptyBins: return "EmptyBins";
    case ErrorKind::NoLabeledPixels: return "NoLabeledPixels";
    case ErrorKind::DegeneratePatch: return "DegeneratePatch";
    case ErrorKind::NoPatchesForClass: return "NoPatchesForClass";
    case ErrorKind::MissingClassTextures: return "MissingClassTextures";
    case ErrorKind::AllUndefined: return "AllUndefined";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingInput: return "MissingInput";
  }
  return "Unknown";
}

}  // namespace cueforge
