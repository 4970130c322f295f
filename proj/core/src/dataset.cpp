#include "cueforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cueforge/error.hpp"
#include "cueforge/image_io.hpp"

namespace cueforge {
namespace fs = std::filesystem;
using nlohmann::json;

ClassTable::ClassTable(std::vector<ClassEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() > kIgnoreLabel) {
    throw Error(ErrorKind::SchemaError, "at most 255 classes fit an 8-bit mask");
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id != static_cast<int>(i)) {
      throw Error(ErrorKind::SchemaError, "class ids must be contiguous from 0; missing or duplicate id " +
                                              std::to_string(i));
    }
  }
}

ClassTable ClassTable::generic(int num_classes) {
  std::vector<ClassEntry> entries;
  for (int k = 0; k < num_classes; ++k) {
    // Evenly spaced hues at full saturation for display.
    const double h = 6.0 * k / std::max(1, num_classes);
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double rgb[6][3] = {{1, f, 0}, {1 - f, 1, 0}, {0, 1, f}, {0, 1 - f, 1}, {f, 0, 1}, {1, 0, 1 - f}};
    ClassEntry e;
    e.id = k;
    e.name = "class_" + std::to_string(k);
    for (int c = 0; c < 3; ++c) e.color[c] = static_cast<std::uint8_t>(std::lround(rgb[sector][c] * 255.0));
    entries.push_back(e);
  }
  return ClassTable(std::move(entries));
}

std::string CueSet::to_string() const {
  std::string out;
  auto add = [&](bool flag, const char* name) {
    if (!flag) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(s, "S");
  add(t, "T");
  add(v, "V");
  add(hs, "HS");
  return out.empty() ? "none" : out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(ErrorKind::SchemaError, "unknown split '" + text + "'");
}

std::size_t ValidationReport::total() const noexcept {
  std::size_t sum = std::accumulate(class_counts.begin(), class_counts.end(), ignore_count);
  for (const auto& v : violations) sum += v.count;
  return sum;
}

ValidationReport validate_mask(const LabelMask& mask, const ClassTable& table) {
  ValidationReport report;
  report.class_counts.assign(static_cast<std::size_t>(table.size()), 0);
  std::array<std::size_t, 256> histogram{};
  for (Label l : mask.labels()) ++histogram[l];
  for (int k = 0; k < table.size(); ++k) report.class_counts[k] = histogram[k];
  report.ignore_count = histogram[kIgnoreLabel];
  for (int l = table.size(); l < kIgnoreLabel; ++l) {
    if (histogram[l] == 0) continue;
    LabelViolation v;
    v.label = static_cast<Label>(l);
    v.count = histogram[l];
    const auto it = std::find(mask.labels().begin(), mask.labels().end(), v.label);
    const auto offset = static_cast<int>(it - mask.labels().begin());
    v.first_y = offset / mask.width();
    v.first_x = offset % mask.width();
    report.violations.push_back(v);
  }
  return report;
}

namespace {

template <typename T>
T require(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) {
    throw Error(ErrorKind::SchemaError, where.string() + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, where.string() + ": field '" + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base_dir, const std::string& entry) {
  fs::path p(entry);
  if (p.is_relative()) p = base_dir / p;
  return fs::absolute(p).lexically_normal();
}

}  // namespace

DatasetManifest load_dataset(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) throw Error(ErrorKind::MissingFile, manifest_path.string());
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, manifest_path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, manifest_path.string() + ": not an object");

  const fs::path base_dir = fs::absolute(manifest_path).parent_path();
  DatasetManifest m;
  m.name = require<std::string>(j, "name", manifest_path);
  m.split = parse_split(require<std::string>(j, "split", manifest_path));
  m.provenance = j.value("provenance", std::string{});
  m.rng_seed = j.value("rng_seed", std::uint64_t{0});

  std::vector<ClassEntry> classes;
  for (const json& c : require<json>(j, "classes", manifest_path)) {
    ClassEntry e;
    e.id = require<int>(c, "id", manifest_path);
    e.name = require<std::string>(c, "name", manifest_path);
    const auto color = c.value("color", std::vector<int>{0, 0, 0});
    if (color.size() != 3) throw Error(ErrorKind::SchemaError, "class color must be an RGB triple");
    for (int k = 0; k < 3; ++k) e.color[k] = static_cast<std::uint8_t>(std::clamp(color[k], 0, 255));
    classes.push_back(std::move(e));
  }
  m.class_table = ClassTable(std::move(classes));

  const json cues = require<json>(j, "cue_set", manifest_path);
  m.cue_set = CueSet{cues.value("s", false), cues.value("t", false), cues.value("v", false),
                     cues.value("hs", false)};
  if (!m.cue_set.valid()) {
    throw Error(ErrorKind::SchemaError, "cue set " + m.cue_set.to_string() +
                                            " has texture without a color carrier");
  }

  for (const json& item : require<json>(j, "items", manifest_path)) {
    DatasetItem di;
    di.image = resolve(base_dir, require<std::string>(item, "image", manifest_path));
    di.mask = resolve(base_dir, require<std::string>(item, "mask", manifest_path));
    for (const auto& p : {di.image, di.mask}) {
      if (!fs::exists(p)) throw Error(ErrorKind::MissingFile, p.string());
    }
    m.items.push_back(std::move(di));
  }
  if (!m.items.empty()) load_item(m, 0);
  return m;
}

LoadedItem load_item(const DatasetManifest& manifest, std::size_t index) {
  if (index >= manifest.items.size()) {
    throw Error(ErrorKind::InvalidParameter, "item index " + std::to_string(index) + " out of range");
  }
  const DatasetItem& item = manifest.items[index];
  LoadedItem out{read_png_image(item.image), read_png_mask(item.mask)};
  if (!out.mask.same_size(out.image)) {
    throw Error(ErrorKind::DimensionMismatch,
                item.image.string() + " is " + std::to_string(out.image.height()) + "x" +
                    std::to_string(out.image.width()) + " but mask " + item.mask.string() + " is " +
                    std::to_string(out.mask.height()) + "x" + std::to_string(out.mask.width()));
  }
  const ValidationReport report = validate_mask(out.mask, manifest.class_table);
  if (!report.valid()) {
    const auto& v = report.violations.front();
    throw Error(ErrorKind::SchemaError, item.mask.string() + ": class id " + std::to_string(v.label) +
                                            " outside a " + std::to_string(manifest.class_table.size()) +
                                            "-class table at (" + std::to_string(v.first_y) + "," +
                                            std::to_string(v.first_x) + ")");
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& manifest_path) {
  const fs::path base_dir = fs::absolute(manifest_path).parent_path();
  auto relative = [&](const fs::path& p) {
    return fs::absolute(p).lexically_normal().lexically_relative(base_dir).generic_string();
  };
  json classes = json::array();
  for (const ClassEntry& e : manifest.class_table.entries()) {
    classes.push_back({{"id", e.id}, {"name", e.name}, {"color", {e.color[0], e.color[1], e.color[2]}}});
  }
  json items = json::array();
  for (const DatasetItem& item : manifest.items) {
    items.push_back({{"image", relative(item.image)}, {"mask", relative(item.mask)}});
  }
  json j = {
      {"name", manifest.name},
      {"split", to_string(manifest.split)},
      {"classes", classes},
      {"cue_set", {{"s", manifest.cue_set.s}, {"t", manifest.cue_set.t}, {"v", manifest.cue_set.v},
                   {"hs", manifest.cue_set.hs}}},
      {"items", items},
      {"provenance", manifest.provenance},
      {"rng_seed", manifest.rng_seed},
  };
  fs::create_directories(base_dir);
  std::ofstream out(manifest_path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + manifest_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "short write " + manifest_path.string());
}

}  // namespace cueforge
