#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cueforge/raster.hpp"

namespace cueforge {

/// Decodes an 8-bit gray or RGB PNG into a GRAY or RGB raster scaled to [0,1].
/// 16-bit samples are reduced to 8 bits; alpha channels are dropped.
RasterImage read_png_image(const std::filesystem::path& path);

/// Quantizes to 8 bits (round to nearest, clamped). GRAY/EDGE write one
/// channel, RGB writes three. HSV rasters are rejected; convert first.
void write_png_image(const RasterImage& image, const std::filesystem::path& path);

/// Reads a single-channel 8-bit mask. Palette PNGs yield their raw indices.
LabelMask read_png_mask(const std::filesystem::path& path);
void write_png_mask(const LabelMask& mask, const std::filesystem::path& path);

/// Raw float planes (PFM: "Pf" for one channel, "PF" for three). Values are
/// stored as little-endian float32, rows bottom to top.
void write_pfm(const RasterImage& image, const std::filesystem::path& path);
RasterImage read_pfm(const std::filesystem::path& path, ColorSpace space_hint = ColorSpace::GRAY);

/// A stack of equally sized single-channel planes, stored as one "Pf" image of
/// height H*planes; plane k occupies rows [k*H, (k+1)*H).
struct PlaneStack {
  int height = 0;
  int width = 0;
  int planes = 0;
  std::vector<float> data;  // plane-major, row-major within a plane
};
void write_pfm_stack(const PlaneStack& stack, const std::filesystem::path& path);
PlaneStack read_pfm_stack(const std::filesystem::path& path, int planes);

}  // namespace cueforge
