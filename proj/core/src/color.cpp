#include "cueforge/color.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cueforge/error.hpp"
#include "cueforge/parallel.hpp"

namespace cueforge {

Hsv rgb_to_hsv(Rgb p) noexcept {
  const double max = std::max({p.r, p.g, p.b});
  const double min = std::min({p.r, p.g, p.b});
  const double delta = max - min;
  Hsv out;
  out.v = max;
  out.s = max > 0.0 ? delta / max : 0.0;
  if (delta <= 0.0 || out.s == 0.0) {
    out.s = 0.0;
    out.h = 0.0;
    return out;
  }
  double sector;
  if (max == p.r) {
    sector = (p.g - p.b) / delta;
    if (sector < 0.0) sector += 6.0;
  } else if (max == p.g) {
    sector = (p.b - p.r) / delta + 2.0;
  } else {
    sector = (p.r - p.g) / delta + 4.0;
  }
  out.h = sector / 6.0;
  if (out.h >= 1.0) out.h -= 1.0;
  return out;
}

Rgb hsv_to_rgb(Hsv p) noexcept {
  const double v = p.v;
  if (p.s <= 0.0) return {v, v, v};
  double h6 = (p.h - std::floor(p.h)) * 6.0;
  if (h6 >= 6.0) h6 = 0.0;
  const int sector = static_cast<int>(h6);
  const double f = h6 - sector;
  const double lo = v * (1.0 - p.s);
  const double falling = v * (1.0 - p.s * f);
  const double rising = v * (1.0 - p.s * (1.0 - f));
  switch (sector) {
    case 0: return {v, rising, lo};
    case 1: return {falling, v, lo};
    case 2: return {lo, v, rising};
    case 3: return {lo, falling, v};
    case 4: return {rising, lo, v};
    default: return {v, lo, falling};
  }
}

namespace {
void require_space(const RasterImage& img, ColorSpace expected, const char* op) {
  if (img.space() != expected) {
    throw Error(ErrorKind::WrongColorSpace, std::string(op) + " expects " +
                                                std::string(to_string(expected)) + " input, got " +
                                                std::string(to_string(img.space())));
  }
}
}  // namespace

RasterImage rgb_to_hsv(const RasterImage& img) {
  require_space(img, ColorSpace::RGB, "rgb_to_hsv");
  RasterImage out(img.height(), img.width(), ColorSpace::HSV);
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto h = out.plane(0), s = out.plane(1), v = out.plane(2);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Hsv p = rgb_to_hsv(Rgb{r[i], g[i], b[i]});
    h[i] = p.h;
    s[i] = p.s;
    v[i] = p.v;
  }
  return out;
}

RasterImage hsv_to_rgb(const RasterImage& img) {
  require_space(img, ColorSpace::HSV, "hsv_to_rgb");
  RasterImage out(img.height(), img.width(), ColorSpace::RGB);
  auto h = img.plane(0), s = img.plane(1), v = img.plane(2);
  auto r = out.plane(0), g = out.plane(1), b = out.plane(2);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Rgb p = hsv_to_rgb(Hsv{h[i], s[i], v[i]});
    r[i] = p.r;
    g[i] = p.g;
    b[i] = p.b;
  }
  return out;
}

RasterImage to_gray(const RasterImage& img, GrayMode mode) {
  require_space(img, ColorSpace::RGB, "to_gray");
  RasterImage out(img.height(), img.width(), ColorSpace::GRAY);
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto y = out.plane(0);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    y[i] = mode == GrayMode::Mean ? (r[i] + g[i] + b[i]) / 3.0 : std::max({r[i], g[i], b[i]});
  }
  return out;
}

RasterImage project_cues(const RasterImage& img, CueSet keep, GrayMode mode, double neutral_value) {
  if (!keep.v && !keep.hs) {
    throw Error(ErrorKind::EmptyColorCarrier, "projection must keep V, HS, or both");
  }
  if (keep.v && !keep.hs && img.space() == ColorSpace::GRAY) return img;
  require_space(img, ColorSpace::RGB, "project_cues");
  if (keep.v && keep.hs) return img;
  if (keep.v) return to_gray(img, mode);
  RasterImage hsv = rgb_to_hsv(img);
  std::fill(hsv.plane(2).begin(), hsv.plane(2).end(), neutral_value);
  return hsv_to_rgb(hsv);
}

int feature_dim(CueSet keep) {
  if (keep.s || keep.t) {
    throw Error(ErrorKind::BadCueSet, "pixel features carry no shape or texture; got " + keep.to_string());
  }
  if (keep.v && keep.hs) return 3;
  if (keep.hs) return 2;
  if (keep.v) return 1;
  throw Error(ErrorKind::EmptyColorCarrier, "pixel features need V, HS, or both");
}

void pixel_features(const RasterImage& img, CueSet keep, GrayMode mode, int y, int x,
                    std::span<double> out) {
  if (img.space() == ColorSpace::GRAY || img.space() == ColorSpace::EDGE) {
    if (!(keep.v && !keep.hs)) {
      throw Error(ErrorKind::WrongColorSpace, "single-channel images only provide the V cue");
    }
    out[0] = img.at(0, y, x);
    return;
  }
  Rgb p{img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)};
  if (img.space() == ColorSpace::HSV) p = hsv_to_rgb(Hsv{p.r, p.g, p.b});
  if (keep.v && keep.hs) {
    out[0] = p.r;
    out[1] = p.g;
    out[2] = p.b;
  } else if (keep.hs) {
    const Hsv q = rgb_to_hsv(p);
    out[0] = q.h;
    out[1] = q.s;
  } else {
    out[0] = mode == GrayMode::Mean ? (p.r + p.g + p.b) / 3.0 : std::max({p.r, p.g, p.b});
  }
}

std::vector<std::size_t> stratified_quota(std::span<const std::size_t> class_pixels,
                                          std::size_t samples) {
  std::vector<std::size_t> quota(class_pixels.size(), 0);
  std::vector<std::size_t> present;
  for (std::size_t k = 0; k < class_pixels.size(); ++k)
    if (class_pixels[k] > 0) present.push_back(k);
  if (present.empty()) return quota;
  // Most frequent first; ties to the lower id.
  std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
    return class_pixels[a] > class_pixels[b];
  });
  std::size_t remaining = std::min(samples, std::accumulate(class_pixels.begin(), class_pixels.end(),
                                                            std::size_t{0}));
  // Repeatedly split the outstanding budget over classes that still have spare pixels.
  while (remaining > 0) {
    std::vector<std::size_t> open;
    for (std::size_t k : present)
      if (quota[k] < class_pixels[k]) open.push_back(k);
    const std::size_t share = remaining / open.size();
    std::size_t extra = remaining % open.size();
    for (std::size_t k : open) {
      std::size_t want = share + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
      const std::size_t give = std::min(want, class_pixels[k] - quota[k]);
      quota[k] += give;
      remaining -= give;
    }
  }
  return quota;
}

PixelDataset build_pixel_dataset(std::span<const std::pair<RasterImage, LabelMask>> items,
                                 CueSet keep, GrayMode mode, std::size_t samples_per_image,
                                 std::uint64_t seed, unsigned workers) {
  if (samples_per_image < 1) throw Error(ErrorKind::InvalidParameter, "samples_per_image must be >= 1");
  const int dim = feature_dim(keep);
  struct Partial {
    std::vector<double> features;
    std::vector<Label> labels;
  };
  std::vector<Partial> partials(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const auto& [image, mask] = items[i];
    if (!mask.same_size(image)) {
      throw Error(ErrorKind::DimensionMismatch, "image/mask size differ for item " + std::to_string(i));
    }
    std::vector<std::vector<std::size_t>> by_class(256);
    for (std::size_t p = 0; p < mask.pixel_count(); ++p)
      if (mask[p] != kIgnoreLabel) by_class[mask[p]].push_back(p);
    std::vector<std::size_t> counts(256);
    for (std::size_t k = 0; k < 256; ++k) counts[k] = by_class[k].size();
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) {
      throw Error(ErrorKind::NoLabeledPixels, "item " + std::to_string(i) + " has no labeled pixels");
    }
    const auto quota = stratified_quota(counts, samples_per_image);
    Rng rng = Rng::for_item(seed, i);
    Partial& part = partials[i];
    std::vector<double> feature(static_cast<std::size_t>(dim));
    for (std::size_t k = 0; k < 256; ++k) {
      if (quota[k] == 0) continue;
      for (std::uint64_t pick : rng.sample_without_replacement(counts[k], quota[k])) {
        const std::size_t p = by_class[k][pick];
        pixel_features(image, keep, mode, static_cast<int>(p / image.width()),
                       static_cast<int>(p % image.width()), feature);
        part.features.insert(part.features.end(), feature.begin(), feature.end());
        part.labels.push_back(static_cast<Label>(k));
      }
    }
  });
  PixelDataset ds;
  ds.cue_set = keep;
  ds.feature_dim = dim;
  for (auto& part : partials) {
    ds.features.insert(ds.features.end(), part.features.begin(), part.features.end());
    ds.labels.insert(ds.labels.end(), part.labels.begin(), part.labels.end());
  }
  return ds;
}

}  // namespace cueforge
