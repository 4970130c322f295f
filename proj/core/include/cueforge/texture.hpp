#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "cueforge/dataset.hpp"
#include "cueforge/raster.hpp"
#include "cueforge/rng.hpp"

namespace cueforge {

inline constexpr std::size_t kMinSegmentPixels = 36;

/// Bounding-box crop of one segment. Pixels outside the segment are transparent.
struct TexturePatch {
  Label class_id = 0;
  int height = 0;
  int width = 0;
  std::vector<double> rgb;          // 3 planes of height*width
  std::vector<std::uint8_t> opaque;  // height*width flags
  std::size_t area = 0;              // number of opaque pixels

  double at(int c, int y, int x) const noexcept {
    return rgb[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool is_opaque(int y, int x) const noexcept {
    return opaque[static_cast<std::size_t>(y) * width + x] != 0;
  }
  friend bool operator==(const TexturePatch&, const TexturePatch&) = default;
};

struct PatchPool {
  std::map<Label, std::vector<TexturePatch>> patches;
  std::map<Label, std::size_t> augmented;  // augmented copies added per class

  bool contains(Label c) const { return patches.contains(c) && !patches.at(c).empty(); }
  std::size_t class_area(Label c) const;
  std::size_t patch_count() const;
  /// Smallest patch area in the pool, 0 when empty.
  std::size_t min_area() const;
  /// Appends `other` after this pool's patches, class by class.
  void merge(PatchPool other);
};

/// One TexturePatch per 8-connected same-class component of at least
/// `min_pixels` pixels. IGNORE pixels never form patches.
PatchPool extract_patches(const RasterImage& img, const LabelMask& mask, const ClassTable& table,
                          std::size_t min_pixels = kMinSegmentPixels);

struct AugmentRanges {
  double crop_min = 0.6;   // center crop keeps [crop_min, 1] of each extent
  double shift = 0.1;      // translation, fraction of extent
  double scale_min = 0.9;
  double scale_max = 1.1;
  double max_angle_deg = 15.0;
};

struct AugmentParams {
  bool flip = false;
  double crop = 1.0;
  double shift_y = 0.0;
  double shift_x = 0.0;
  double scale = 1.0;
  double angle_deg = 0.0;
};

AugmentParams draw_augment_params(Rng& rng, const AugmentRanges& ranges = {});

/// Horizontal flip, then center crop, then shift-scale-rotate about the
/// center with nearest-neighbour sampling (source colors are copied, never
/// blended). The output canvas is the bounding box of the transformed
/// content, padded on one side by the shift.
TexturePatch apply_augment(const TexturePatch& patch, const AugmentParams& params);

/// Random augmentation whose result keeps at least min(min_pixels, area) opaque
/// pixels; draws that fall short are redrawn, and after a bounded number of
/// attempts a flip-only copy is returned.
TexturePatch augment_patch(const TexturePatch& patch, Rng& rng,
                           std::size_t min_pixels = kMinSegmentPixels,
                           const AugmentRanges& ranges = {});

/// Adds augmented copies of each class's original patches until
/// histogram[c] + added_area >= fraction * max histogram value over pool classes.
PatchPool balance_pool(PatchPool pool, const std::map<Label, std::size_t>& pixel_histogram, Rng& rng,
                       double fraction = 0.5, std::size_t min_pixels = kMinSegmentPixels,
                       std::size_t max_added_per_class = 100000);

struct MosaicImage {
  Label class_id = 0;
  RasterImage pixels;                // RGB
  std::vector<std::uint8_t> filled;  // per-pixel fill flags, all set on completion

  std::size_t unfilled_count() const;
};

/// Pastes random patches of `class_id` (opaque pixels overwrite) until every
/// pixel is covered. Each paste is anchored so that it covers the first
/// unfilled pixel in scanline order, preferring placements fully on canvas.
MosaicImage build_mosaic(const PatchPool& pool, Label class_id, int height, int width, Rng& rng);

using MosaicPool = std::map<Label, std::vector<MosaicImage>>;

struct ContourFilledImage {
  Label class_id = 0;
  RasterImage pixels;             // RGB, size of the base mask
  std::vector<int> segment_map;   // base-mask segment index per pixel
};

/// Fills every 8-connected segment of `base_mask` (IGNORE regions included)
/// with an independent random crop of a `class_id` mosaic.
ContourFilledImage contour_fill(const MosaicPool& mosaics, const LabelMask& base_mask, Label class_id,
                                Rng& rng);

using ContourPool = std::map<Label, std::vector<ContourFilledImage>>;

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct VoronoiLayout {
  int height = 0;
  int width = 0;
  std::vector<Point> seeds;
  std::vector<int> cell_map;      // nearest seed per pixel, ties to lowest index
  std::vector<Label> cell_class;  // per seed; empty until assigned
};

/// Nearest-seed rasterization (Euclidean, lowest index on ties) for given seeds.
VoronoiLayout rasterize_voronoi(int height, int width, std::vector<Point> seeds);

/// Draws `n_seeds` distinct grid points uniformly, then rasterizes.
VoronoiLayout rasterize_voronoi(int height, int width, std::size_t n_seeds, Rng& rng);

struct TextureSample {
  RasterImage image;
  LabelMask mask;
};

/// Draws a uniform class per cell and copies each cell from a random position
/// of a random contour-filled image of that class. Sets layout.cell_class.
TextureSample assign_and_fill(VoronoiLayout& layout, const ContourPool& contour_pool,
                              const ClassTable& table, Rng& rng);

struct TextureConfig {
  std::size_t min_pixels = kMinSegmentPixels;
  std::optional<std::size_t> n_seeds;  // overrides seeds_per_mpx
  double seeds_per_mpx = 128.0;
  std::optional<std::pair<int, int>> out_size;  // (H, W); defaults to the first base item
  double balance_fraction = 0.5;
  int augmented_copies = 1;          // augmented copies per extracted patch
  int mosaics_per_class = 2;
  int contour_images_per_class = 4;
  AugmentRanges augment;
};

/// Number of Voronoi seeds for an H x W layout under `cfg`.
std::size_t seeds_for(const TextureConfig& cfg, int height, int width);

struct TextureDatasetResult {
  DatasetManifest manifest;
  PatchPool pool;                     // after augmentation and balancing
  std::vector<MosaicImage> mosaics;   // all classes, class-major
  std::vector<VoronoiLayout> layouts; // one per generated item
};

/// Full texture-cue pipeline: patches from every base item, balanced pool,
/// per-class mosaics, contour-filled images on random base masks, then one
/// filled Voronoi layout per base item. PNGs go to out_dir/images and
/// out_dir/masks; the returned manifest (cue set T+V+HS) is not written.
TextureDatasetResult generate_texture_dataset(const DatasetManifest& base, const TextureConfig& cfg,
                                              std::uint64_t seed,
                                              const std::filesystem::path& out_dir,
                                              unsigned workers = 1);

}  // namespace cueforge
