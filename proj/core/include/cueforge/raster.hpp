#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cueforge {

enum class ColorSpace { RGB, HSV, GRAY, EDGE };

std::string_view to_string(ColorSpace space) noexcept;
int channels_for(ColorSpace space) noexcept;

/// H x W x C planar raster of real intensities. Plane c occupies
/// data[c*H*W, (c+1)*H*W), rows stored top to bottom.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, ColorSpace space, double fill = 0.0);
  RasterImage(int height, int width, ColorSpace space, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  ColorSpace space() const noexcept { return space_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

  std::span<double> plane(int c) noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
  }
  std::span<const double> plane(int c) const noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Relabels the color space without touching pixel values. Channel count must match.
  void retag(ColorSpace space);

  /// True iff every intensity lies in [0,1].
  bool in_unit_range() const noexcept;

  bool same_size(const RasterImage& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) +
            static_cast<std::size_t>(y)) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ColorSpace space_ = ColorSpace::GRAY;
  std::vector<double> data_;
};

using Label = std::uint8_t;
/// Sentinel for unlabeled pixels, matching the 8-bit mask file convention.
inline constexpr Label kIgnoreLabel = 255;

/// Per-pixel class ids, row-major.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, Label fill = 0);
  LabelMask(int height, int width, std::vector<Label> labels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  Label& at(int y, int x) noexcept { return labels_[index(y, x)]; }
  Label at(int y, int x) const noexcept { return labels_[index(y, x)]; }
  Label& operator[](std::size_t i) noexcept { return labels_[i]; }
  Label operator[](std::size_t i) const noexcept { return labels_[i]; }

  std::span<Label> labels() noexcept { return labels_; }
  std::span<const Label> labels() const noexcept { return labels_; }

  bool same_size(const LabelMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_size(const RasterImage& img) const noexcept {
    return height_ == img.height() && width_ == img.width();
  }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<Label> labels_;
};

}  // namespace cueforge
