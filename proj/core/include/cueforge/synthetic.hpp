#pragma once

#include <cstdint>
#include <filesystem>

#include "cueforge/dataset.hpp"
#include "cueforge/raster.hpp"
#include "cueforge/rng.hpp"

namespace cueforge {

/// Procedural stand-in for a labeled photo dataset: Voronoi regions, each
/// class rendered with its own hue and an oriented stripe texture plus noise.
struct SyntheticConfig {
  int num_classes = 5;
  int height = 128;
  int width = 128;
  int regions = 10;        // Voronoi regions per image, at least num_classes
  double noise = 0.04;     // uniform noise amplitude on the value channel
  int ignore_border = 0;   // width of an IGNORE frame around each mask
};

struct SyntheticItem {
  RasterImage image;  // RGB
  LabelMask mask;
};

/// Every class occupies at least one region of every item.
SyntheticItem make_synthetic_item(const SyntheticConfig& cfg, Rng& rng);

/// Writes `count` items as out_dir/images/%06zu.png and out_dir/masks/%06zu.png
/// plus out_dir/manifest.json. Item i uses Rng::for_item(seed, i).
DatasetManifest write_synthetic_dataset(const SyntheticConfig& cfg, std::size_t count, std::uint64_t seed,
                                        const std::filesystem::path& out_dir, const std::string& provenance = {});

}  // namespace cueforge
