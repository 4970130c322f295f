#pragma once

#include <cstddef>
#include <vector>

#include "cueforge/raster.hpp"

namespace cueforge {

struct Component {
  Label class_id = 0;
  std::size_t area = 0;
  // Inclusive bounding box.
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;

  int box_height() const noexcept { return y1 - y0 + 1; }
  int box_width() const noexcept { return x1 - x0 + 1; }
};

struct ComponentMap {
  int height = 0;
  int width = 0;
  std::vector<int> index;  // per pixel component index, -1 where excluded
  std::vector<Component> components;  // ordered by first pixel in scanline order
};

/// 8-connected same-label components via two-pass scanline union-find.
/// IGNORE pixels are excluded unless `include_ignore`, in which case they form
/// components of their own like any other label.
ComponentMap label_components(const LabelMask& mask, bool include_ignore = false);

}  // namespace cueforge
