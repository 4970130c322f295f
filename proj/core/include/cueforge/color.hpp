#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cueforge/dataset.hpp"
#include "cueforge/raster.hpp"
#include "cueforge/rng.hpp"

namespace cueforge {

enum class GrayMode { Mean, Max };

/// Hexcone HSV with every component in [0,1]: hue is angle/360 in [0,1), and
/// hue is 0 wherever saturation is 0.
struct Hsv {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

Hsv rgb_to_hsv(Rgb rgb) noexcept;
Rgb hsv_to_rgb(Hsv hsv) noexcept;

RasterImage rgb_to_hsv(const RasterImage& img);
RasterImage hsv_to_rgb(const RasterImage& img);
RasterImage to_gray(const RasterImage& img, GrayMode mode);

/// Value the V channel is pinned to when rendering chroma-only images.
inline constexpr double kNeutralValue = 0.5;

/// Keeps only the color carriers in `keep` (its S/T flags are ignored):
/// {V} yields a GRAY image, {HS} an RGB rendering with V pinned to
/// `neutral_value`, {V,HS} returns the input. GRAY input is accepted for {V}.
RasterImage project_cues(const RasterImage& img, CueSet keep, GrayMode mode,
                         double neutral_value = kNeutralValue);

/// Per-pixel feature vectors for a color-only cue set:
/// {V} -> [gray], {HS} -> [h, s], {V,HS} -> [r, g, b].
int feature_dim(CueSet keep);
void pixel_features(const RasterImage& img, CueSet keep, GrayMode mode, int y, int x,
                    std::span<double> out);

struct PixelDataset {
  std::vector<double> features;  // row-major, rows x feature_dim
  std::vector<Label> labels;
  CueSet cue_set;
  int feature_dim = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {features.data() + i * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
};

/// Class-stratified pixel sample across images. Each image i draws up to
/// `samples_per_image` pixels without replacement from a generator seeded with
/// seed ^ i; the quota is split evenly over the classes present (remainder to the
/// most frequent), and a class short of its quota hands the deficit on.
PixelDataset build_pixel_dataset(std::span<const std::pair<RasterImage, LabelMask>> items,
                                 CueSet keep, GrayMode mode, std::size_t samples_per_image,
                                 std::uint64_t seed, unsigned workers = 1);

/// Per-class quotas used by build_pixel_dataset; exposed for testing.
std::vector<std::size_t> stratified_quota(std::span<const std::size_t> class_pixels,
                                          std::size_t samples);

}  // namespace cueforge
