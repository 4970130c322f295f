#include "cueforge/raster.hpp"

#include <algorithm>
#include <string>

#include "cueforge/error.hpp"

namespace cueforge {

std::string_view to_string(ColorSpace space) noexcept {
  switch (space) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::HSV: return "HSV";
    case ColorSpace::GRAY: return "GRAY";
    case ColorSpace::EDGE: return "EDGE";
  }
  return "?";
}

int channels_for(ColorSpace space) noexcept {
  return (space == ColorSpace::RGB || space == ColorSpace::HSV) ? 3 : 1;
}

namespace {
void check_dims(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorKind::InvalidParameter,
                "raster dimensions must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
}
}  // namespace

RasterImage::RasterImage(int height, int width, ColorSpace space, double fill)
    : height_(height), width_(width), channels_(channels_for(space)), space_(space) {
  check_dims(height, width);
  data_.assign(pixel_count() * static_cast<std::size_t>(channels_), fill);
}

RasterImage::RasterImage(int height, int width, ColorSpace space, std::vector<double> data)
    : height_(height), width_(width), channels_(channels_for(space)), space_(space),
      data_(std::move(data)) {
  check_dims(height, width);
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels_)) {
    throw Error(ErrorKind::DimensionMismatch, "raster buffer size does not match " +
                                                  std::to_string(height) + "x" +
                                                  std::to_string(width) + "x" +
                                                  std::to_string(channels_));
  }
}

void RasterImage::retag(ColorSpace space) {
  if (channels_for(space) != channels_) {
    throw Error(ErrorKind::WrongColorSpace, "cannot retag a " + std::to_string(channels_) +
                                               "-channel raster as " +
                                               std::string(to_string(space)));
  }
  space_ = space;
}

bool RasterImage::in_unit_range() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

LabelMask::LabelMask(int height, int width, Label fill) : height_(height), width_(width) {
  check_dims(height, width);
  labels_.assign(pixel_count(), fill);
}

LabelMask::LabelMask(int height, int width, std::vector<Label> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  check_dims(height, width);
  if (labels_.size() != pixel_count()) {
    throw Error(ErrorKind::DimensionMismatch, "label buffer size does not match " +
                                                  std::to_string(height) + "x" +
                                                  std::to_string(width));
  }
}

}  // namespace cueforge
