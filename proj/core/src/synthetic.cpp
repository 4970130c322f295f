#include "cueforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cueforge/color.hpp"
#include "cueforge/error.hpp"
#include "cueforge/image_io.hpp"
#include "cueforge/texture.hpp"

namespace cueforge {

namespace {

struct ClassStyle {
  double hue = 0.0;
  double saturation = 0.0;
  double angle = 0.0;
  double period = 0.0;
};

ClassStyle style_for(int c, int k) {
  ClassStyle s;
  s.hue = static_cast<double>(c) / static_cast<double>(k);
  s.saturation = 0.55 + 0.1 * (c % 3);
  s.angle = std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
  s.period = 4.0 + 2.0 * (c % 4);
  return s;
}

}  // namespace

SyntheticItem make_synthetic_item(const SyntheticConfig& cfg, Rng& rng) {
  if (cfg.num_classes < 1 || cfg.num_classes > 255)
    throw Error(ErrorKind::InvalidParameter, "class count must lie in [1,255]");
  if (cfg.height < 1 || cfg.width < 1) throw Error(ErrorKind::InvalidParameter, "image size must be positive");
  if (cfg.regions < cfg.num_classes)
    throw Error(ErrorKind::InvalidParameter, "need at least one region per class");
  if (cfg.ignore_border < 0) throw Error(ErrorKind::InvalidParameter, "ignore border must be >= 0");

  VoronoiLayout layout = rasterize_voronoi(cfg.height, cfg.width, static_cast<std::size_t>(cfg.regions), rng);
  std::vector<Label> region_class(static_cast<std::size_t>(cfg.regions));
  for (int r = 0; r < cfg.regions; ++r)
    region_class[r] = static_cast<Label>(r < cfg.num_classes ? r : rng.below(static_cast<std::uint64_t>(cfg.num_classes)));
  rng.shuffle(std::span<Label>(region_class));

  std::vector<double> phase(static_cast<std::size_t>(cfg.num_classes));
  for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  SyntheticItem item{RasterImage(cfg.height, cfg.width, ColorSpace::RGB), LabelMask(cfg.height, cfg.width)};
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
      const Label c = region_class[static_cast<std::size_t>(layout.cell_map[i])];
      const ClassStyle s = style_for(c, cfg.num_classes);
      const double u = x * std::cos(s.angle) + y * std::sin(s.angle);
      const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / s.period + phase[c]);
      const double v = std::clamp(0.35 + 0.4 * stripe + rng.uniform(-cfg.noise, cfg.noise), 0.0, 1.0);
      const Rgb rgb = hsv_to_rgb(Hsv{s.hue, s.saturation, v});
      item.image.at(0, y, x) = rgb.r;
      item.image.at(1, y, x) = rgb.g;
      item.image.at(2, y, x) = rgb.b;
      const bool border = y < cfg.ignore_border || x < cfg.ignore_border || y >= cfg.height - cfg.ignore_border ||
                          x >= cfg.width - cfg.ignore_border;
      item.mask[i] = border ? kIgnoreLabel : c;
    }
  }
  return item;
}

DatasetManifest write_synthetic_dataset(const SyntheticConfig& cfg, std::size_t count, std::uint64_t seed,
                                        const std::filesystem::path& out_dir, const std::string& provenance) {
  namespace fs = std::filesystem;
  if (count == 0) throw Error(ErrorKind::InvalidParameter, "item count must be positive");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  DatasetManifest m;
  m.name = "synthetic";
  m.split = Split::Train;
  m.class_table = ClassTable::generic(cfg.num_classes);
  m.cue_set = CueSet::all();
  m.provenance = provenance;
  m.rng_seed = seed;
  char name[32];
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::for_item(seed, i);
    const SyntheticItem item = make_synthetic_item(cfg, rng);
    std::snprintf(name, sizeof name, "%06zu.png", i);
    const DatasetItem paths{fs::absolute(out_dir / "images" / name).lexically_normal(),
                            fs::absolute(out_dir / "masks" / name).lexically_normal()};
    write_png_image(item.image, paths.image);
    write_png_mask(item.mask, paths.mask);
    m.items.push_back(paths);
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace cueforge
