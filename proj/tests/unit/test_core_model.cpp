#include <doctest.h>

#include <fstream>
#include <functional>
#include <set>

#include "cueforge/components.hpp"
#include "cueforge/dataset.hpp"
#include "cueforge/error.hpp"
#include "cueforge/image_io.hpp"
#include "cueforge/raster.hpp"
#include "cueforge/rng.hpp"
#include "temp_dir.hpp"

using namespace cueforge;
using cueforge::testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

// Writes n items of h x w with a left/right class split, returns the manifest path.
std::filesystem::path write_dataset(const TempDir& dir, int n, int h, int w, int classes) {
  DatasetManifest m;
  m.name = "unit";
  m.class_table = ClassTable::generic(classes);
  m.provenance = "unit test";
  for (int i = 0; i < n; ++i) {
    RasterImage img(h, w, ColorSpace::RGB, 0.25 * (i % 4));
    LabelMask mask(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) mask.at(y, x) = static_cast<Label>(x < w / 2 ? 0 : classes - 1);
    const auto img_path = dir / ("images/" + std::to_string(i) + ".png");
    const auto mask_path = dir / ("masks/" + std::to_string(i) + ".png");
    write_png_image(img, img_path);
    write_png_mask(mask, mask_path);
    m.items.push_back({img_path, mask_path});
  }
  save_manifest(m, dir / "manifest.json");
  return dir / "manifest.json";
}

}  // namespace

TEST_CASE("raster channel counts follow the color space") {
  CHECK(RasterImage(2, 3, ColorSpace::RGB).channels() == 3);
  CHECK(RasterImage(2, 3, ColorSpace::HSV).channels() == 3);
  CHECK(RasterImage(2, 3, ColorSpace::GRAY).channels() == 1);
  CHECK(RasterImage(2, 3, ColorSpace::EDGE).channels() == 1);
  CHECK(kind_of([] { RasterImage(2, 2, ColorSpace::RGB, std::vector<double>(5)); }) ==
        ErrorKind::DimensionMismatch);
}

TEST_CASE("raster layout is planar and row-major") {
  RasterImage img(2, 3, ColorSpace::RGB);
  img.at(1, 1, 2) = 0.5;
  CHECK(img.data()[1 * 6 + 1 * 3 + 2] == 0.5);
  CHECK(img.plane(1)[5] == 0.5);
  CHECK(img.in_unit_range());
  img.at(0, 0, 0) = 1.5;
  CHECK_FALSE(img.in_unit_range());
}

TEST_CASE("retag requires a matching channel count") {
  RasterImage img(2, 2, ColorSpace::RGB);
  img.retag(ColorSpace::HSV);
  CHECK(img.space() == ColorSpace::HSV);
  CHECK(kind_of([&] { img.retag(ColorSpace::GRAY); }) == ErrorKind::WrongColorSpace);
}

TEST_CASE("class tables are contiguous from zero") {
  const ClassTable t = ClassTable::generic(4);
  CHECK(t.size() == 4);
  CHECK(t.contains(3));
  CHECK_FALSE(t.contains(4));
  CHECK(kind_of([] { ClassTable({{0, "a", {}}, {2, "b", {}}}); }) == ErrorKind::SchemaError);
  CHECK(kind_of([] { ClassTable({{0, "a", {}}, {0, "b", {}}}); }) == ErrorKind::SchemaError);
}

TEST_CASE("texture requires a color carrier") {
  CHECK(CueSet{true, true, true, false}.valid());
  CHECK_FALSE(CueSet{true, true, false, false}.valid());
  CHECK(CueSet::all().to_string() == "S+T+V+HS");
  CHECK(CueSet{}.to_string() == "none");
  CHECK(CueSet{false, false, true, false}.color_only());
}

TEST_CASE("validate_mask counts classes, ignore and violations") {
  const ClassTable t = ClassTable::generic(3);
  SUBCASE("uniform class 0") {
    const auto r = validate_mask(LabelMask(4, 4, 0), t);
    CHECK(r.class_counts == std::vector<std::size_t>{16, 0, 0});
    CHECK(r.valid());
  }
  SUBCASE("id K is a violation") {
    LabelMask m(4, 4, 0);
    m.at(2, 3) = 3;
    m.at(3, 1) = 3;
    const auto r = validate_mask(m, t);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].label == 3);
    CHECK(r.violations[0].count == 2);
    CHECK(r.violations[0].first_y == 2);
    CHECK(r.violations[0].first_x == 3);
  }
  SUBCASE("half class 1, half ignore") {
    LabelMask m(4, 4, 1);
    for (int y = 2; y < 4; ++y)
      for (int x = 0; x < 4; ++x) m.at(y, x) = kIgnoreLabel;
    const auto r = validate_mask(m, t);
    CHECK(r.class_counts[1] == 8);
    CHECK(r.ignore_count == 8);
    CHECK(r.total() == 16);
  }
}

TEST_CASE("manifest save and load roundtrip") {
  TempDir dir("core-manifest");
  const auto path = write_dataset(dir, 3, 6, 8, 2);
  const DatasetManifest m = load_dataset(path);
  CHECK(m.items.size() == 3);
  CHECK(m.class_table.size() == 2);
  CHECK(m.provenance == "unit test");
  for (const auto& item : m.items) CHECK(item.image.is_absolute());
  const LoadedItem item = load_item(m, 1);
  CHECK(item.image.height() == 6);
  CHECK(item.mask.at(0, 7) == 1);
}

TEST_CASE("manifest paths are stored relative to the manifest") {
  TempDir dir("core-relative");
  const auto path = write_dataset(dir, 1, 4, 4, 2);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find(dir.path().string()) == std::string::npos);
  CHECK(text.find("images/0.png") != std::string::npos);
}

TEST_CASE("manifest errors") {
  TempDir dir("core-errors");
  CHECK(kind_of([&] { load_dataset(dir / "absent.json"); }) == ErrorKind::MissingFile);

  SUBCASE("image and mask disagree in size") {
    const auto path = write_dataset(dir, 1, 8, 8, 2);
    write_png_image(RasterImage(8, 4, ColorSpace::RGB), dir / "images/0.png");
    CHECK(kind_of([&] { load_dataset(path); }) == ErrorKind::DimensionMismatch);
  }
  SUBCASE("class id outside the table") {
    const auto path = write_dataset(dir, 2, 8, 8, 19);
    write_png_mask(LabelMask(8, 8, 19), dir / "masks/1.png");
    const DatasetManifest m = load_dataset(path);
    CHECK(kind_of([&] { load_item(m, 1); }) == ErrorKind::SchemaError);
  }
  SUBCASE("missing referenced file") {
    const auto path = write_dataset(dir, 2, 4, 4, 2);
    std::filesystem::remove(dir / "masks/1.png");
    CHECK(kind_of([&] { load_dataset(path); }) == ErrorKind::MissingFile);
  }
  SUBCASE("malformed json") {
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK(kind_of([&] { load_dataset(dir / "bad.json"); }) == ErrorKind::SchemaError);
  }
}

TEST_CASE("png roundtrip quantizes to 8 bits") {
  TempDir dir("core-png");
  RasterImage img(3, 5, ColorSpace::RGB);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<double>(i % 11) / 10.0;
  write_png_image(img, dir / "a.png");
  const RasterImage back = read_png_image(dir / "a.png");
  REQUIRE(back.same_size(img));
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5 / 255.0);

  LabelMask mask(3, 5, 2);
  mask.at(1, 1) = kIgnoreLabel;
  write_png_mask(mask, dir / "m.png");
  CHECK(read_png_mask(dir / "m.png") == mask);
}

TEST_CASE("pfm roundtrip is float32 exact") {
  TempDir dir("core-pfm");
  RasterImage img(4, 3, ColorSpace::RGB);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<float>(0.1 * static_cast<double>(i));
  write_pfm(img, dir / "a.pfm");
  CHECK(read_pfm(dir / "a.pfm", ColorSpace::RGB) == img);
}

TEST_CASE("components are 8-connected and ordered by first pixel") {
  // clang-format off
  const LabelMask m(4, 5, {
      1, 0, 0, 2, 2,
      0, 1, 0, 0, 2,
      0, 0, 0, 1, 0,
      255, 255, 0, 0, 1});
  // clang-format on
  const ComponentMap cm = label_components(m);
  REQUIRE(cm.components.size() == 4);
  CHECK(cm.components[0].class_id == 1);
  CHECK(cm.components[0].area == 2);  // diagonal pair
  CHECK(cm.components[1].class_id == 0);
  CHECK(cm.components[1].area == 11);
  CHECK(cm.components[2].class_id == 2);
  CHECK(cm.components[2].area == 3);
  CHECK(cm.components[3].class_id == 1);
  CHECK(cm.components[3].area == 2);
  CHECK(cm.index[15] == -1);
  CHECK(cm.components[2].y0 == 0);
  CHECK(cm.components[2].x1 == 4);

  const ComponentMap with_ignore = label_components(m, true);
  CHECK(with_ignore.components.size() == 5);
}

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(Rng::for_item(7, 1).next() != Rng::for_item(7, 2).next());
  CHECK(Rng::derive(7, 0) != Rng::derive(7, 1));

  Rng r(3);
  const auto picks = r.sample_without_replacement(20, 10);
  CHECK(std::set<std::uint64_t>(picks.begin(), picks.end()).size() == 10);
  for (auto v : picks) CHECK(v < 20);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.between(-2, 2);
    CHECK((v >= -2 && v <= 2));
  }
}
