#include "cueforge/texture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "cueforge/components.hpp"
#include "cueforge/error.hpp"
#include "cueforge/image_io.hpp"
#include "cueforge/parallel.hpp"

namespace cueforge {
namespace fs = std::filesystem;

std::size_t PatchPool::class_area(Label c) const {
  const auto it = patches.find(c);
  if (it == patches.end()) return 0;
  std::size_t sum = 0;
  for (const auto& p : it->second) sum += p.area;
  return sum;
}

std::size_t PatchPool::patch_count() const {
  std::size_t n = 0;
  for (const auto& [c, list] : patches) n += list.size();
  return n;
}

std::size_t PatchPool::min_area() const {
  std::size_t best = 0;
  bool any = false;
  for (const auto& [c, list] : patches) {
    for (const auto& p : list) {
      if (!any || p.area < best) best = p.area;
      any = true;
    }
  }
  return best;
}

void PatchPool::merge(PatchPool other) {
  for (auto& [c, list] : other.patches) {
    auto& dst = patches[c];
    dst.insert(dst.end(), std::make_move_iterator(list.begin()), std::make_move_iterator(list.end()));
  }
  for (const auto& [c, n] : other.augmented) augmented[c] += n;
}

PatchPool extract_patches(const RasterImage& img, const LabelMask& mask, const ClassTable& table,
                          std::size_t min_pixels) {
  if (!mask.same_size(img)) {
    throw Error(ErrorKind::DimensionMismatch, "extract_patches: image and mask sizes differ");
  }
  if (img.space() != ColorSpace::RGB) {
    throw Error(ErrorKind::WrongColorSpace, "extract_patches expects an RGB image");
  }
  const ComponentMap cm = label_components(mask);
  PatchPool pool;
  for (std::size_t i = 0; i < cm.components.size(); ++i) {
    const Component& comp = cm.components[i];
    if (comp.area < min_pixels || !table.contains(comp.class_id)) continue;
    TexturePatch p;
    p.class_id = comp.class_id;
    p.height = comp.box_height();
    p.width = comp.box_width();
    p.area = comp.area;
    const std::size_t n = static_cast<std::size_t>(p.height) * p.width;
    p.rgb.assign(3 * n, 0.0);
    p.opaque.assign(n, 0);
    for (int y = comp.y0; y <= comp.y1; ++y) {
      for (int x = comp.x0; x <= comp.x1; ++x) {
        if (cm.index[static_cast<std::size_t>(y) * cm.width + x] != static_cast<int>(i)) continue;
        const std::size_t local = static_cast<std::size_t>(y - comp.y0) * p.width + (x - comp.x0);
        p.opaque[local] = 1;
        for (int c = 0; c < 3; ++c) p.rgb[c * n + local] = img.at(c, y, x);
      }
    }
    pool.patches[p.class_id].push_back(std::move(p));
  }
  return pool;
}

AugmentParams draw_augment_params(Rng& rng, const AugmentRanges& r) {
  AugmentParams p;
  p.flip = rng.bernoulli(0.5);
  p.crop = rng.uniform(r.crop_min, 1.0);
  p.shift_y = rng.uniform(-r.shift, r.shift);
  p.shift_x = rng.uniform(-r.shift, r.shift);
  p.scale = rng.uniform(r.scale_min, r.scale_max);
  p.angle_deg = rng.uniform(-r.max_angle_deg, r.max_angle_deg);
  return p;
}

namespace {

TexturePatch blank_patch(Label class_id, int height, int width) {
  TexturePatch p;
  p.class_id = class_id;
  p.height = height;
  p.width = width;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  p.rgb.assign(3 * n, 0.0);
  p.opaque.assign(n, 0);
  return p;
}

void copy_pixel(const TexturePatch& src, int sy, int sx, TexturePatch& dst, int dy, int dx) {
  const std::size_t sn = static_cast<std::size_t>(src.height) * src.width;
  const std::size_t dn = static_cast<std::size_t>(dst.height) * dst.width;
  const std::size_t si = static_cast<std::size_t>(sy) * src.width + sx;
  const std::size_t di = static_cast<std::size_t>(dy) * dst.width + dx;
  if (!src.opaque[si]) return;
  if (!dst.opaque[di]) ++dst.area;
  dst.opaque[di] = 1;
  for (int c = 0; c < 3; ++c) dst.rgb[c * dn + di] = src.rgb[c * sn + si];
}

}  // namespace

TexturePatch apply_augment(const TexturePatch& patch, const AugmentParams& params) {
  // Flip and center crop.
  const int ch = std::clamp(static_cast<int>(std::lround(patch.height * params.crop)), 1, patch.height);
  const int cw = std::clamp(static_cast<int>(std::lround(patch.width * params.crop)), 1, patch.width);
  const int oy = (patch.height - ch) / 2;
  const int ox = (patch.width - cw) / 2;
  TexturePatch cropped = blank_patch(patch.class_id, ch, cw);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const int sx = params.flip ? patch.width - 1 - (ox + x) : ox + x;
      copy_pixel(patch, oy + y, sx, cropped, y, x);
    }
  }

  // Shift-scale-rotate about the center, inverse-mapped with nearest neighbour.
  const double theta = params.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double scale = params.scale;
  const double half_w = scale * (std::abs(cs) * cw + std::abs(sn) * ch) / 2.0;
  const double half_h = scale * (std::abs(sn) * cw + std::abs(cs) * ch) / 2.0;
  const int content_w = std::max(1, static_cast<int>(std::ceil(2.0 * half_w - 1e-9)));
  const int content_h = std::max(1, static_cast<int>(std::ceil(2.0 * half_h - 1e-9)));
  const int pad_x = static_cast<int>(std::lround(std::abs(params.shift_x) * cw));
  const int pad_y = static_cast<int>(std::lround(std::abs(params.shift_y) * ch));
  TexturePatch out = blank_patch(patch.class_id, content_h + pad_y, content_w + pad_x);
  const double src_cx = (cw - 1) / 2.0, src_cy = (ch - 1) / 2.0;
  const double dst_cx = (content_w - 1) / 2.0 + (params.shift_x > 0 ? pad_x : 0);
  const double dst_cy = (content_h - 1) / 2.0 + (params.shift_y > 0 ? pad_y : 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double qx = x - dst_cx, qy = y - dst_cy;
      const double px = (cs * qx + sn * qy) / scale + src_cx;
      const double py = (-sn * qx + cs * qy) / scale + src_cy;
      const int sx = static_cast<int>(std::lround(px));
      const int sy = static_cast<int>(std::lround(py));
      if (sx < 0 || sy < 0 || sx >= cw || sy >= ch) continue;
      copy_pixel(cropped, sy, sx, out, y, x);
    }
  }
  return out;
}

TexturePatch augment_patch(const TexturePatch& patch, Rng& rng, std::size_t min_pixels,
                           const AugmentRanges& ranges) {
  if (patch.area == 0) throw Error(ErrorKind::DegeneratePatch, "patch has no opaque pixels");
  const std::size_t floor_area = std::min(min_pixels, patch.area);
  constexpr int kAttempts = 16;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    TexturePatch out = apply_augment(patch, draw_augment_params(rng, ranges));
    if (out.area >= std::max<std::size_t>(floor_area, 1)) return out;
  }
  AugmentParams flip_only;
  flip_only.flip = true;
  return apply_augment(patch, flip_only);
}

PatchPool balance_pool(PatchPool pool, const std::map<Label, std::size_t>& pixel_histogram, Rng& rng,
                       double fraction, std::size_t min_pixels, std::size_t max_added_per_class) {
  std::size_t max_count = 0;
  for (const auto& [c, list] : pool.patches) {
    if (list.empty()) continue;
    const auto it = pixel_histogram.find(c);
    if (it == pixel_histogram.end()) {
      throw Error(ErrorKind::InvalidParameter,
                  "pixel histogram lacks pool class " + std::to_string(c));
    }
    max_count = std::max(max_count, it->second);
  }
  const double target = fraction * static_cast<double>(max_count);
  for (auto& [c, list] : pool.patches) {
    if (list.empty()) continue;
    const std::size_t originals = list.size();
    double measure = static_cast<double>(pixel_histogram.at(c));
    std::size_t added = 0;
    while (measure < target && added < max_added_per_class) {
      const std::size_t pick = static_cast<std::size_t>(rng.below(originals));
      TexturePatch aug = augment_patch(list[pick], rng, min_pixels);
      measure += static_cast<double>(aug.area);
      list.push_back(std::move(aug));
      ++added;
    }
    if (added > 0) pool.augmented[c] += added;
  }
  return pool;
}

std::size_t MosaicImage::unfilled_count() const {
  return static_cast<std::size_t>(std::count(filled.begin(), filled.end(), std::uint8_t{0}));
}

MosaicImage build_mosaic(const PatchPool& pool, Label class_id, int height, int width, Rng& rng) {
  if (!pool.contains(class_id)) {
    throw Error(ErrorKind::NoPatchesForClass, "no texture patches for class " + std::to_string(class_id));
  }
  const auto& patches = pool.patches.at(class_id);
  // Opaque pixel coordinates per patch, computed once.
  std::vector<std::vector<Point>> opaque(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    for (int y = 0; y < patches[i].height; ++y)
      for (int x = 0; x < patches[i].width; ++x)
        if (patches[i].is_opaque(y, x)) opaque[i].push_back({x, y});
    if (opaque[i].empty()) throw Error(ErrorKind::DegeneratePatch, "pool holds an empty patch");
  }

  MosaicImage mosaic{class_id, RasterImage(height, width, ColorSpace::RGB),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0)};
  std::size_t cursor = 0;
  std::vector<Point> candidates;
  const std::size_t total = mosaic.filled.size();
  while (true) {
    while (cursor < total && mosaic.filled[cursor]) ++cursor;
    if (cursor == total) break;
    const int ty = static_cast<int>(cursor / width);
    const int tx = static_cast<int>(cursor % width);
    const std::size_t pick = static_cast<std::size_t>(rng.below(patches.size()));
    const TexturePatch& p = patches[pick];
    candidates.clear();
    for (const Point& q : opaque[pick]) {
      const int oy = ty - q.y, ox = tx - q.x;
      if (oy >= 0 && ox >= 0 && oy + p.height <= height && ox + p.width <= width) candidates.push_back(q);
    }
    const auto& choices = candidates.empty() ? opaque[pick] : candidates;
    const Point anchor = choices[static_cast<std::size_t>(rng.below(choices.size()))];
    const int oy = ty - anchor.y, ox = tx - anchor.x;
    for (const Point& q : opaque[pick]) {
      const int y = oy + q.y, x = ox + q.x;
      if (y < 0 || x < 0 || y >= height || x >= width) continue;
      for (int c = 0; c < 3; ++c) mosaic.pixels.at(c, y, x) = p.at(c, q.y, q.x);
      mosaic.filled[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return mosaic;
}

namespace {

// Origin of a random crop of `extent` pixels from a source of `source` pixels.
// When the crop fits it stays inside the source; otherwise reads wrap around.
int crop_origin(Rng& rng, int extent, int source) {
  if (extent <= source) return static_cast<int>(rng.below(static_cast<std::uint64_t>(source - extent + 1)));
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(source)));
}

}  // namespace

ContourFilledImage contour_fill(const MosaicPool& mosaics, const LabelMask& base_mask, Label class_id,
                                Rng& rng) {
  const auto it = mosaics.find(class_id);
  if (it == mosaics.end() || it->second.empty()) {
    throw Error(ErrorKind::NoPatchesForClass, "no mosaic for class " + std::to_string(class_id));
  }
  const auto& sources = it->second;
  const ComponentMap cm = label_components(base_mask, /*include_ignore=*/true);
  ContourFilledImage out{class_id, RasterImage(base_mask.height(), base_mask.width(), ColorSpace::RGB),
                         cm.index};
  struct Fill {
    const MosaicImage* source;
    int oy, ox;
  };
  std::vector<Fill> fills;
  fills.reserve(cm.components.size());
  for (const Component& comp : cm.components) {
    const MosaicImage& src = sources[static_cast<std::size_t>(rng.below(sources.size()))];
    const int oy = crop_origin(rng, comp.box_height(), src.pixels.height());
    const int ox = crop_origin(rng, comp.box_width(), src.pixels.width());
    fills.push_back({&src, oy - comp.y0, ox - comp.x0});
  }
  for (int y = 0; y < base_mask.height(); ++y) {
    for (int x = 0; x < base_mask.width(); ++x) {
      const Fill& f = fills[static_cast<std::size_t>(cm.index[static_cast<std::size_t>(y) * cm.width + x])];
      const RasterImage& src = f.source->pixels;
      const int sy = ((y + f.oy) % src.height() + src.height()) % src.height();
      const int sx = ((x + f.ox) % src.width() + src.width()) % src.width();
      for (int c = 0; c < 3; ++c) out.pixels.at(c, y, x) = src.at(c, sy, sx);
    }
  }
  return out;
}

VoronoiLayout rasterize_voronoi(int height, int width, std::vector<Point> seeds) {
  if (height <= 0 || width <= 0) throw Error(ErrorKind::InvalidParameter, "layout size must be positive");
  if (seeds.empty()) throw Error(ErrorKind::InvalidParameter, "at least one seed is required");
  VoronoiLayout layout{height, width, std::move(seeds), {}, {}};
  layout.cell_map.assign(static_cast<std::size_t>(height) * width, 0);

  // Seeds sorted by row; each pixel searches outward in |dy| from its row,
  // starting from the previous pixel's winner, and stops once dy^2 exceeds
  // the best squared distance found.
  const auto& s = layout.seeds;
  std::vector<int> by_row(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) by_row[i] = static_cast<int>(i);
  std::sort(by_row.begin(), by_row.end(), [&](int a, int b) {
    return s[a].y != s[b].y ? s[a].y < s[b].y : a < b;
  });
  auto dist2 = [&](int idx, int y, int x) {
    const std::int64_t dy = s[idx].y - y, dx = s[idx].x - x;
    return dy * dy + dx * dx;
  };
  int previous = 0;
  for (int y = 0; y < height; ++y) {
    const auto split = std::lower_bound(by_row.begin(), by_row.end(), y,
                                        [&](int idx, int row) { return s[idx].y < row; }) -
                       by_row.begin();
    for (int x = 0; x < width; ++x) {
      int best = previous;
      std::int64_t best_d = dist2(best, y, x);
      auto consider = [&](int idx) {
        const std::int64_t d = dist2(idx, y, x);
        if (d < best_d || (d == best_d && idx < best)) {
          best = idx;
          best_d = d;
        }
      };
      for (std::ptrdiff_t k = split - 1; k >= 0; --k) {
        const std::int64_t dy = y - s[by_row[k]].y;
        if (dy * dy > best_d) break;
        consider(by_row[k]);
      }
      for (std::size_t k = static_cast<std::size_t>(split); k < by_row.size(); ++k) {
        const std::int64_t dy = s[by_row[k]].y - y;
        if (dy * dy > best_d) break;
        consider(by_row[k]);
      }
      layout.cell_map[static_cast<std::size_t>(y) * width + x] = best;
      previous = best;
    }
  }
  return layout;
}

VoronoiLayout rasterize_voronoi(int height, int width, std::size_t n_seeds, Rng& rng) {
  const std::size_t pixels = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (n_seeds < 1 || n_seeds > pixels) {
    throw Error(ErrorKind::TooManySeeds, std::to_string(n_seeds) + " seeds requested for " +
                                             std::to_string(pixels) + " pixels");
  }
  std::vector<Point> seeds;
  seeds.reserve(n_seeds);
  for (std::uint64_t flat : rng.sample_without_replacement(pixels, n_seeds)) {
    seeds.push_back({static_cast<int>(flat % width), static_cast<int>(flat / width)});
  }
  return rasterize_voronoi(height, width, std::move(seeds));
}

TextureSample assign_and_fill(VoronoiLayout& layout, const ContourPool& contour_pool,
                              const ClassTable& table, Rng& rng) {
  std::vector<int> missing;
  for (int k = 0; k < table.size(); ++k) {
    const auto it = contour_pool.find(static_cast<Label>(k));
    if (it == contour_pool.end() || it->second.empty()) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "no contour-filled textures for class";
    for (int k : missing) msg << ' ' << k;
    throw Error(ErrorKind::MissingClassTextures, msg.str());
  }
  const std::size_t cells = layout.seeds.size();
  // Cell bounding boxes so crops can stay inside their source where possible.
  std::vector<Point> lo(cells, Point{layout.width, layout.height}), hi(cells, Point{-1, -1});
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int c = layout.cell_map[static_cast<std::size_t>(y) * layout.width + x];
      lo[c] = {std::min(lo[c].x, x), std::min(lo[c].y, y)};
      hi[c] = {std::max(hi[c].x, x), std::max(hi[c].y, y)};
    }
  }
  struct Fill {
    const RasterImage* source;
    int oy, ox;
  };
  std::vector<Fill> fills(cells);
  layout.cell_class.assign(cells, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    const Label cls = static_cast<Label>(rng.below(static_cast<std::uint64_t>(table.size())));
    layout.cell_class[c] = cls;
    const auto& sources = contour_pool.at(cls);
    const RasterImage& src = sources[static_cast<std::size_t>(rng.below(sources.size()))].pixels;
    const int oy = crop_origin(rng, hi[c].y - lo[c].y + 1, src.height());
    const int ox = crop_origin(rng, hi[c].x - lo[c].x + 1, src.width());
    fills[c] = {&src, oy - lo[c].y, ox - lo[c].x};
  }
  TextureSample out{RasterImage(layout.height, layout.width, ColorSpace::RGB),
                    LabelMask(layout.height, layout.width)};
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int c = layout.cell_map[static_cast<std::size_t>(y) * layout.width + x];
      const Fill& f = fills[c];
      const int sy = ((y + f.oy) % f.source->height() + f.source->height()) % f.source->height();
      const int sx = ((x + f.ox) % f.source->width() + f.source->width()) % f.source->width();
      for (int ch = 0; ch < 3; ++ch) out.image.at(ch, y, x) = f.source->at(ch, sy, sx);
      out.mask.at(y, x) = layout.cell_class[c];
    }
  }
  return out;
}

std::size_t seeds_for(const TextureConfig& cfg, int height, int width) {
  const std::size_t pixels = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (cfg.n_seeds) return *cfg.n_seeds;
  const double n = std::round(cfg.seeds_per_mpx * static_cast<double>(pixels) / 1e6);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(n, 1.0)), 1, pixels);
}

namespace {
enum Stage : std::uint64_t { kAugment = 1, kBalance = 2, kMosaic = 3, kContour = 4, kLayout = 5 };

std::string item_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", i);
  return buf;
}
}  // namespace

TextureDatasetResult generate_texture_dataset(const DatasetManifest& base, const TextureConfig& cfg,
                                              std::uint64_t seed, const fs::path& out_dir,
                                              unsigned workers) {
  const std::size_t n = base.items.size();
  if (n == 0) throw Error(ErrorKind::EmptyDataset, "base dataset has no items");
  if (cfg.balance_fraction < 0.0 || cfg.balance_fraction > 1.0) {
    throw Error(ErrorKind::InvalidParameter, "balance fraction must lie in [0,1]");
  }
  if (cfg.mosaics_per_class < 1 || cfg.contour_images_per_class < 1 || cfg.augmented_copies < 0) {
    throw Error(ErrorKind::InvalidParameter, "mosaic/contour counts must be positive");
  }
  const ClassTable& table = base.class_table;

  // Stage 1: patches per base item, merged in item order.
  std::vector<PatchPool> partial(n);
  std::vector<LabelMask> masks(n);
  parallel_for(n, workers, [&](std::size_t i) {
    LoadedItem item = load_item(base, i);
    if (item.image.space() != ColorSpace::RGB) {
      throw Error(ErrorKind::WrongColorSpace, "texture extraction needs RGB base images");
    }
    partial[i] = extract_patches(item.image, item.mask, table, cfg.min_pixels);
    masks[i] = std::move(item.mask);
  });
  PatchPool pool;
  for (auto& p : partial) pool.merge(std::move(p));
  partial.clear();

  std::vector<int> missing;
  for (int k = 0; k < table.size(); ++k)
    if (!pool.contains(static_cast<Label>(k))) missing.push_back(k);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "no segment of at least " << cfg.min_pixels << " pixels for class";
    for (int k : missing) msg << ' ' << k;
    throw Error(ErrorKind::MissingClassTextures, msg.str());
  }

  // Augmented copies of every extracted patch, then balancing by covered area.
  Rng augment_rng(Rng::derive(seed, kAugment));
  for (auto& [c, list] : pool.patches) {
    const std::size_t originals = list.size();
    for (std::size_t i = 0; i < originals; ++i) {
      for (int r = 0; r < cfg.augmented_copies; ++r) {
        list.push_back(augment_patch(list[i], augment_rng, cfg.min_pixels, cfg.augment));
        ++pool.augmented[c];
      }
    }
  }
  std::map<Label, std::size_t> histogram;
  for (const auto& [c, list] : pool.patches) histogram[c] = pool.class_area(c);
  Rng balance_rng(Rng::derive(seed, kBalance));
  pool = balance_pool(std::move(pool), histogram, balance_rng, cfg.balance_fraction, cfg.min_pixels);

  // Stage 2: mosaics and contour-filled images per class.
  int mosaic_h = 0, mosaic_w = 0;
  for (const auto& m : masks) {
    mosaic_h = std::max(mosaic_h, m.height());
    mosaic_w = std::max(mosaic_w, m.width());
  }
  const std::size_t k_classes = static_cast<std::size_t>(table.size());
  std::vector<std::vector<MosaicImage>> mosaic_lists(k_classes);
  parallel_for(k_classes, workers, [&](std::size_t c) {
    Rng rng = Rng::for_item(Rng::derive(seed, kMosaic), c);
    for (int m = 0; m < cfg.mosaics_per_class; ++m) {
      mosaic_lists[c].push_back(build_mosaic(pool, static_cast<Label>(c), mosaic_h, mosaic_w, rng));
    }
  });
  MosaicPool mosaics;
  for (std::size_t c = 0; c < k_classes; ++c) mosaics[static_cast<Label>(c)] = mosaic_lists[c];

  std::vector<std::vector<ContourFilledImage>> contour_lists(k_classes);
  parallel_for(k_classes, workers, [&](std::size_t c) {
    Rng rng = Rng::for_item(Rng::derive(seed, kContour), c);
    for (int j = 0; j < cfg.contour_images_per_class; ++j) {
      const std::size_t source = static_cast<std::size_t>(rng.below(n));
      contour_lists[c].push_back(contour_fill(mosaics, masks[source], static_cast<Label>(c), rng));
    }
  });
  ContourPool contours;
  for (std::size_t c = 0; c < k_classes; ++c) contours[static_cast<Label>(c)] = std::move(contour_lists[c]);

  // Stage 3: one filled Voronoi layout per base item.
  const int out_h = cfg.out_size ? cfg.out_size->first : masks.front().height();
  const int out_w = cfg.out_size ? cfg.out_size->second : masks.front().width();
  const std::size_t n_seeds = seeds_for(cfg, out_h, out_w);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  std::vector<VoronoiLayout> layouts(n);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng rng = Rng::for_item(Rng::derive(seed, kLayout), i);
    layouts[i] = rasterize_voronoi(out_h, out_w, n_seeds, rng);
    TextureSample sample = assign_and_fill(layouts[i], contours, table, rng);
    write_png_image(sample.image, out_dir / "images" / item_name(i));
    write_png_mask(sample.mask, out_dir / "masks" / item_name(i));
  });

  TextureDatasetResult result;
  DatasetManifest& m = result.manifest;
  m.name = base.name + "_texture";
  m.split = base.split;
  m.class_table = table;
  m.cue_set = CueSet{false, true, true, true};
  m.rng_seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    m.items.push_back({fs::absolute(out_dir / "images" / item_name(i)).lexically_normal(),
                       fs::absolute(out_dir / "masks" / item_name(i)).lexically_normal()});
  }
  std::ostringstream prov;
  prov << "texture: min_pixels=" << cfg.min_pixels << " n_seeds=" << n_seeds
       << " out_size=" << out_h << "x" << out_w << " balance_fraction=" << cfg.balance_fraction
       << " augmented_copies=" << cfg.augmented_copies << " mosaics_per_class=" << cfg.mosaics_per_class
       << " contour_images_per_class=" << cfg.contour_images_per_class << " seed=" << seed
       << " base=" << base.name;
  m.provenance = prov.str();
  result.pool = std::move(pool);
  for (auto& list : mosaic_lists)
    for (auto& mosaic : list) result.mosaics.push_back(std::move(mosaic));
  result.layouts = std::move(layouts);
  return result;
}

}  // namespace cueforge
