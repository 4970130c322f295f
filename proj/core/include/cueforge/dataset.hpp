#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cueforge/raster.hpp"

namespace cueforge {

struct ClassEntry {
  int id = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{0, 0, 0};

  friend bool operator==(const ClassEntry&, const ClassEntry&) = default;
};

/// Contiguous class ids 0..K-1.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<ClassEntry> entries);

  /// K anonymous classes named class_0.. with evenly spaced hues.
  static ClassTable generic(int num_classes);

  int size() const noexcept { return static_cast<int>(entries_.size()); }
  const std::vector<ClassEntry>& entries() const noexcept { return entries_; }
  const ClassEntry& operator[](int id) const { return entries_.at(static_cast<std::size_t>(id)); }
  bool contains(Label label) const noexcept { return label < entries_.size(); }

  friend bool operator==(const ClassTable&, const ClassTable&) = default;

 private:
  std::vector<ClassEntry> entries_;
};

/// Which visual cues a dataset retains: shape, texture, gray value, chroma.
struct CueSet {
  bool s = false;
  bool t = false;
  bool v = false;
  bool hs = false;

  static constexpr CueSet all() { return {true, true, true, true}; }

  /// Texture needs a brightness or chroma carrier.
  bool valid() const noexcept { return !t || v || hs; }
  bool color_only() const noexcept { return !s && !t && (v || hs); }

  /// "S+T+V+HS" style shorthand; "none" for the empty set.
  std::string to_string() const;

  friend bool operator==(const CueSet&, const CueSet&) = default;
};

enum class Split { Train, Val, Test };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct DatasetItem {
  std::filesystem::path image;
  std::filesystem::path mask;

  friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

struct DatasetManifest {
  std::string name;
  Split split = Split::Train;
  std::vector<DatasetItem> items;  // absolute, lexically normal paths once loaded
  ClassTable class_table;
  CueSet cue_set = CueSet::all();
  std::string provenance;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Reads and validates a manifest. Paths are resolved against the manifest's
/// directory. Every referenced file must exist, and the first item is decoded
/// eagerly (dimensions and label range); the rest are checked by load_item.
DatasetManifest load_dataset(const std::filesystem::path& manifest_path);

/// Writes `manifest` to `manifest_path` with item paths relative to its directory.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path);

struct LoadedItem {
  RasterImage image;
  LabelMask mask;
};

/// Decodes item `index`, checking image/mask dimensions and label range.
LoadedItem load_item(const DatasetManifest& manifest, std::size_t index);

struct LabelViolation {
  Label label = 0;
  std::size_t count = 0;
  int first_y = 0;
  int first_x = 0;
};

struct ValidationReport {
  std::vector<std::size_t> class_counts;  // indexed by class id, size K
  std::size_t ignore_count = 0;
  std::vector<LabelViolation> violations;  // one entry per out-of-range label value

  bool valid() const noexcept { return violations.empty(); }
  std::size_t total() const noexcept;
};

ValidationReport validate_mask(const LabelMask& mask, const ClassTable& table);

}  // namespace cueforge
