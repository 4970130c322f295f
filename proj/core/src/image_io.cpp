#include "cueforge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "cueforge/error.hpp"

namespace cueforge {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_read(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return f;
}

FilePtr open_for_write(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return f;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;  // interleaved
};

[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// keep_palette_indices: return palette indices instead of expanding to RGB.
DecodedPng decode_png(const fs::path& path, bool keep_palette_indices) {
  FilePtr file = open_for_read(path);
  std::string error_text;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text,
                                           png_error_handler, png_warning_handler);
  if (!png) throw Error(ErrorKind::IoError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  DecodedPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::SchemaError, "cannot decode PNG " + path.string() + ": " + error_text);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    if (!keep_palette_indices) png_set_palette_to_rgb(png);
    else if (bit_depth < 8) png_set_packing(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  // tRNS chunks are left unexpanded, which drops that transparency too.
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.pixels.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode_png(const fs::path& path, int width, int height, int channels,
                const std::vector<std::uint8_t>& interleaved) {
  FilePtr file = open_for_write(path);
  std::string error_text;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_text,
                                            png_error_handler, png_warning_handler);
  if (!png) throw Error(ErrorKind::IoError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "cannot encode PNG " + path.string() + ": " + error_text);
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(interleaved.data() + stride * y);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw Error(ErrorKind::IoError, "flush failed " + path.string());
}

std::uint8_t quantize(double v) {
  const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

float to_little_endian(float v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bits = std::bit_cast<std::uint32_t>(v);
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
    return std::bit_cast<float>(bits);
  }
}

struct PfmHeader {
  int channels = 0;
  int width = 0;
  int height = 0;
  bool little_endian = true;
};

void write_pfm_raw(const fs::path& path, const PfmHeader& header, const std::vector<float>& rows_top_down) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << (header.channels == 3 ? "PF" : "Pf") << '\n'
      << header.width << ' ' << header.height << '\n'
      << "-1.0\n";
  const std::size_t stride = static_cast<std::size_t>(header.width) * header.channels;
  for (int y = header.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < stride; ++i) {
      const float v = to_little_endian(rows_top_down[stride * y + i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }
  if (!out) throw Error(ErrorKind::IoError, "short write " + path.string());
}

std::vector<float> read_pfm_raw(const fs::path& path, PfmHeader& header) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string magic;
  double scale = 0.0;
  in >> magic >> header.width >> header.height >> scale;
  in.get();
  if (!in || (magic != "PF" && magic != "Pf") || header.width <= 0 || header.height <= 0) {
    throw Error(ErrorKind::SchemaError, "malformed PFM header in " + path.string());
  }
  header.channels = magic == "PF" ? 3 : 1;
  header.little_endian = scale < 0.0;
  const std::size_t stride = static_cast<std::size_t>(header.width) * header.channels;
  std::vector<float> rows(stride * static_cast<std::size_t>(header.height));
  for (int y = header.height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(rows.data() + stride * y),
            static_cast<std::streamsize>(stride * sizeof(float)));
  }
  if (!in) throw Error(ErrorKind::SchemaError, "truncated PFM " + path.string());
  const bool native_little = std::endian::native == std::endian::little;
  if (header.little_endian != native_little) {
    for (float& v : rows) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
      v = std::bit_cast<float>(bits);
    }
  }
  return rows;
}

}  // namespace

RasterImage read_png_image(const fs::path& path) {
  DecodedPng png = decode_png(path, false);
  const ColorSpace space = png.channels >= 3 ? ColorSpace::RGB : ColorSpace::GRAY;
  RasterImage image(png.height, png.width, space);
  const int channels = image.channels();
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
      for (int c = 0; c < channels; ++c) image.at(c, y, x) = png.pixels[base + c] / 255.0;
    }
  }
  return image;
}

void write_png_image(const RasterImage& image, const fs::path& path) {
  if (image.space() == ColorSpace::HSV) {
    throw Error(ErrorKind::WrongColorSpace, "HSV rasters must be converted to RGB before export");
  }
  const int channels = image.channels();
  std::vector<std::uint8_t> buffer(image.pixel_count() * channels);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * image.width() + x) * channels;
      for (int c = 0; c < channels; ++c) buffer[base + c] = quantize(image.at(c, y, x));
    }
  }
  encode_png(path, image.width(), image.height(), channels, buffer);
}

LabelMask read_png_mask(const fs::path& path) {
  DecodedPng png = decode_png(path, true);
  if (png.channels != 1) {
    throw Error(ErrorKind::SchemaError, "mask " + path.string() + " has " +
                                            std::to_string(png.channels) +
                                            " channels, expected 1");
  }
  return LabelMask(png.height, png.width, std::move(png.pixels));
}

void write_png_mask(const LabelMask& mask, const fs::path& path) {
  std::vector<std::uint8_t> buffer(mask.labels().begin(), mask.labels().end());
  encode_png(path, mask.width(), mask.height(), 1, buffer);
}

void write_pfm(const RasterImage& image, const fs::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw Error(ErrorKind::InvalidParameter, "PFM supports 1 or 3 channels");
  }
  PfmHeader header{image.channels(), image.width(), image.height(), true};
  std::vector<float> rows(image.pixel_count() * image.channels());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        rows[(static_cast<std::size_t>(y) * image.width() + x) * image.channels() + c] =
            static_cast<float>(image.at(c, y, x));
  write_pfm_raw(path, header, rows);
}

RasterImage read_pfm(const fs::path& path, ColorSpace space_hint) {
  PfmHeader header;
  std::vector<float> rows = read_pfm_raw(path, header);
  ColorSpace space = space_hint;
  if (channels_for(space) != header.channels) {
    space = header.channels == 3 ? ColorSpace::RGB : ColorSpace::GRAY;
  }
  RasterImage image(header.height, header.width, space);
  for (int y = 0; y < header.height; ++y)
    for (int x = 0; x < header.width; ++x)
      for (int c = 0; c < header.channels; ++c)
        image.at(c, y, x) = rows[(static_cast<std::size_t>(y) * header.width + x) * header.channels + c];
  return image;
}

void write_pfm_stack(const PlaneStack& stack, const fs::path& path) {
  PfmHeader header{1, stack.width, stack.height * stack.planes, true};
  write_pfm_raw(path, header, stack.data);
}

PlaneStack read_pfm_stack(const fs::path& path, int planes) {
  PfmHeader header;
  std::vector<float> rows = read_pfm_raw(path, header);
  if (header.channels != 1 || planes <= 0 || header.height % planes != 0) {
    throw Error(ErrorKind::SchemaError, path.string() + " is not a stack of " +
                                            std::to_string(planes) + " planes");
  }
  return PlaneStack{header.height / planes, header.width, planes, std::move(rows)};
}

}  // namespace cueforge
