#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "cueforge/error.hpp"
#include "cueforge/experts.hpp"
#include "cueforge/image_io.hpp"
#include "cueforge/rng.hpp"
#include "cueforge/serialize.hpp"
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

constexpr CueSet kVHs{false, false, true, true};

PixelDataset blobs(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  PixelDataset ds;
  ds.cue_set = kVHs;
  ds.feature_dim = 3;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const Label c = static_cast<Label>(i % 2);
    const double centre = c == 0 ? 0.25 : 0.75;
    for (int d = 0; d < 3; ++d) ds.features.push_back(centre + noise(gen));
    ds.labels.push_back(c);
  }
  return ds;
}

RasterImage noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterImage img(h, w, ColorSpace::RGB);
  for (double& v : img.data()) v = u(gen);
  return img;
}

SoftmaxField random_field(int h, int w, int k, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  SoftmaxField f(h, w, k);
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    double s = 0.0;
    for (double& p : f.pixel(i)) s += (p = u(gen));
    for (double& p : f.pixel(i)) p /= s;
  }
  return f;
}

SoftmaxField one_hot(const LabelMask& gt, int k) {
  SoftmaxField f(gt.height(), gt.width(), k);
  for (std::size_t i = 0; i < f.pixel_count(); ++i) f.pixel(i)[gt[i]] = 1.0;
  return f;
}

SoftmaxField uniform(int h, int w, int k) {
  SoftmaxField f(h, w, k);
  for (double& p : f.probs) p = 1.0 / k;
  return f;
}

FusionModel constant_gate(int k, double bias) {
  MlpModel gate{MlpSpec{{2 * k, 4, 1}, Activation::Relu, 0.0}, {}};
  gate.params.assign(parameter_count(gate.spec), 0.0);
  gate.params.back() = bias;
  return {gate, k, 1};
}

}  // namespace

TEST_CASE("training config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::InvalidParameter);
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::InvalidParameter);
  cfg = TrainConfig{};
  cfg.holdout_fraction = 1.0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::InvalidParameter);

  FusionConfig fc;
  fc.window = 2;
  CHECK(kind_of([&] { fc.validate(); }) == ErrorKind::InvalidParameter);
}

TEST_CASE("color expert training") {
  const PixelDataset ds = blobs(400, 3);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 64;
  cfg.rng_seed = 11;
  const TrainResult r = train_color_expert(ds, MlpSpec::parse("3,16,2"), cfg);
  CHECK(r.log.size() == 50);
  CHECK(pixel_accuracy(r.model, ds) >= 0.99);
  CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
  for (const auto& e : r.log) CHECK(e.holdout_accuracy.has_value());

  const TrainResult again = train_color_expert(ds, MlpSpec::parse("3,16,2"), cfg);
  CHECK(again.model == r.model);

  cfg.epochs = 0;
  const TrainResult untrained = train_color_expert(ds, MlpSpec::parse("3,16,2"), cfg);
  CHECK(untrained.log.empty());
  const TrainResult untrained2 = train_color_expert(ds, MlpSpec::parse("3,16,2"), cfg);
  CHECK(untrained.model == untrained2.model);

  cfg.epochs = 1;
  CHECK(kind_of([&] { train_color_expert(PixelDataset{{}, {}, kVHs, 3}, MlpSpec::parse("3,16,2"), cfg); }) ==
        ErrorKind::EmptyDataset);
  CHECK(kind_of([&] { train_color_expert(ds, MlpSpec::parse("2,16,2"), cfg); }) == ErrorKind::DimMismatch);
}

TEST_CASE("dense prediction") {
  const RasterImage img = noise_image(8, 8, 5);
  SUBCASE("zero model gives a uniform field labelled 0") {
    Rng rng(0);
    const DensePrediction p = predict_dense(init_mlp(MlpSpec::parse("3,8,4", 0.0), rng), img, kVHs, GrayMode::Mean);
    for (double v : p.field.probs) CHECK(v == 0.25);
    for (std::size_t i = 0; i < p.labels.pixel_count(); ++i) CHECK(p.labels[i] == 0);
  }
  SUBCASE("constant image gives constant labels") {
    Rng rng(2);
    const MlpModel m = init_mlp(MlpSpec::parse("3,8,4", 1.0), rng);
    const DensePrediction p = predict_dense(m, RasterImage(6, 7, ColorSpace::RGB, 0.4), kVHs, GrayMode::Mean);
    for (std::size_t i = 0; i < p.labels.pixel_count(); ++i) CHECK(p.labels[i] == p.labels[0]);
  }
  SUBCASE("matches a per-pixel loop") {
    Rng rng(9);
    const MlpModel m = init_mlp(MlpSpec::parse("3,8,5", 1.0), rng);
    const DensePrediction p = predict_dense(m, img, kVHs, GrayMode::Mean, 3);
    CHECK(p.field.is_simplex());
    std::vector<double> f(3);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        pixel_features(img, kVHs, GrayMode::Mean, y, x, f);
        const ForwardResult one = forward(m, f, 1);
        const std::size_t i = static_cast<std::size_t>(y) * 8 + x;
        for (int c = 0; c < 5; ++c) CHECK(p.field.pixel(i)[c] == doctest::Approx(one.probs[c]).epsilon(1e-14));
        CHECK(p.labels[i] == argmax(one.logits));
      }
    CHECK(p.field.argmax_labels() == p.labels);
  }
  Rng rng(0);
  CHECK(kind_of([&] { predict_dense(init_mlp(MlpSpec::parse("2,8,4"), rng), img, kVHs, GrayMode::Mean); }) ==
        ErrorKind::DimMismatch);
}

TEST_CASE("no-info baseline") {
  const RasterImage img = noise_image(6, 6, 1);
  Rng a(4), b(4), z(4);
  const DensePrediction pa = no_info_baseline(MlpSpec::parse("3,16,3"), a, img, kVHs, GrayMode::Mean);
  const DensePrediction pb = no_info_baseline(MlpSpec::parse("3,16,3"), b, img, kVHs, GrayMode::Mean);
  CHECK(pa.field.probs == pb.field.probs);
  const DensePrediction pz = no_info_baseline(MlpSpec::parse("3,16,3", 0.0), z, img, kVHs, GrayMode::Mean);
  for (double v : pz.field.probs) CHECK(v == 1.0 / 3.0);
}

TEST_CASE("fusion features") {
  std::mt19937_64 gen(1);
  const SoftmaxField sa = random_field(3, 3, 2, gen), sb = random_field(3, 3, 2, gen);
  std::vector<double> one(4), nine(36);
  fusion_features(sa, sb, 1, 1, 2, one);
  const std::size_t i = 1 * 3 + 2;
  CHECK(one == std::vector<double>{sa.pixel(i)[0], sa.pixel(i)[1], sb.pixel(i)[0], sb.pixel(i)[1]});
  // Corner window clamps to the nearest pixel.
  fusion_features(sa, sb, 3, 0, 0, nine);
  CHECK(nine[0] == sa.pixel(0)[0]);
  CHECK(nine[2] == sb.pixel(0)[0]);
  CHECK(nine[4 * 4] == sa.pixel(0)[0]);
  CHECK(nine[8 * 4 + 3] == sb.pixel(4)[1]);
}

TEST_CASE("fusion gate") {
  std::mt19937_64 gen(7);
  SUBCASE("initial weights sit near one half") {
    std::vector<SoftmaxField> sa{random_field(8, 8, 3, gen)}, sb{random_field(8, 8, 3, gen)};
    std::vector<LabelMask> gts{sa[0].argmax_labels()};
    FusionConfig cfg;
    cfg.train.epochs = 0;
    const FusionTrainResult r = train_fusion(sa, sb, gts, cfg);
    const FusionOutput out = fuse_predict(r.model, sa[0], sb[0]);
    for (double w : out.weights) CHECK(std::abs(w - 0.5) < 1e-2);
  }
  SUBCASE("perfect expert A against uniform B pulls weight to A") {
    std::vector<SoftmaxField> sa, sb;
    std::vector<LabelMask> gts;
    for (int n = 0; n < 4; ++n) {
      LabelMask gt(12, 12);
      for (std::size_t i = 0; i < gt.pixel_count(); ++i) gt[i] = static_cast<Label>(gen() % 3);
      sa.push_back(one_hot(gt, 3));
      sb.push_back(uniform(12, 12, 3));
      gts.push_back(gt);
    }
    FusionConfig cfg;
    cfg.train.epochs = 40;
    cfg.train.batch_size = 64;
    cfg.train.holdout_fraction = 0.0;
    const FusionTrainResult r = train_fusion(sa, sb, gts, cfg);
    double mean = 0.0;
    for (int n = 0; n < 4; ++n) {
      const FusionOutput out = fuse_predict(r.model, sa[n], sb[n]);
      for (double w : out.weights) mean += w;
    }
    CHECK(mean / (4.0 * 144.0) >= 0.8);
  }
  SUBCASE("identical experts fuse to themselves") {
    const SoftmaxField s = random_field(5, 6, 4, gen);
    Rng rng(3);
    const FusionModel f{init_mlp(MlpSpec{{8, 6, 1}, Activation::Relu, 1.0}, rng), 4, 1};
    const FusionOutput out = fuse_predict(f, s, s);
    for (std::size_t i = 0; i < s.probs.size(); ++i) CHECK(out.fused.probs[i] == doctest::Approx(s.probs[i]).epsilon(1e-14));
    CHECK(out.labels == s.argmax_labels());
  }
  SUBCASE("output is a convex combination") {
    const SoftmaxField sa = random_field(6, 6, 3, gen), sb = random_field(6, 6, 3, gen);
    Rng rng(5);
    const FusionModel f{init_mlp(MlpSpec{{6, 5, 1}, Activation::Relu, 2.0}, rng), 3, 1};
    const FusionOutput out = fuse_predict(f, sa, sb);
    CHECK(out.fused.is_simplex(1e-12));
    for (std::size_t i = 0; i < sa.pixel_count(); ++i) {
      const double w = out.weights[i];
      CHECK((w > 0.0 && w < 1.0));
      for (int c = 0; c < 3; ++c)
        CHECK(out.fused.pixel(i)[c] == doctest::Approx(w * sa.pixel(i)[c] + (1 - w) * sb.pixel(i)[c]));
    }
  }
  SUBCASE("saturated gate returns expert A") {
    const SoftmaxField sa = random_field(6, 6, 3, gen), sb = random_field(6, 6, 3, gen);
    const FusionOutput hi = fuse_predict(constant_gate(3, 60.0), sa, sb);
    CHECK(hi.labels == sa.argmax_labels());
    const FusionOutput lo = fuse_predict(constant_gate(3, -60.0), sa, sb);
    CHECK(lo.labels == sb.argmax_labels());
  }
  SUBCASE("shape errors") {
    const SoftmaxField a = random_field(4, 4, 3, gen), b = random_field(4, 5, 3, gen);
    CHECK(kind_of([&] { fuse_predict(constant_gate(3, 0.0), a, b); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { fuse_predict(constant_gate(2, 0.0), a, a); }) == ErrorKind::ShapeMismatch);
    std::vector<SoftmaxField> sa{a}, sb{a};
    std::vector<LabelMask> gts{LabelMask(4, 4, kIgnoreLabel)};
    CHECK(kind_of([&] { train_fusion(sa, sb, gts, FusionConfig{}); }) == ErrorKind::EmptyDataset);
  }
}

TEST_CASE("weight heatmap and csv agree") {
  std::mt19937_64 gen(2);
  const SoftmaxField sa = random_field(9, 7, 3, gen), sb = random_field(9, 7, 3, gen);
  Rng rng(8);
  const FusionModel f{init_mlp(MlpSpec{{6, 5, 1}, Activation::Relu, 3.0}, rng), 3, 1};
  const FusionOutput out = fuse_predict(f, sa, sb);
  TempDir dir("heatmap");
  write_png_image(weight_heatmap(out), dir / "w.png");
  const RasterImage png = read_png_image(dir / "w.png");
  REQUIRE(png.height() == 9);
  REQUIRE(png.width() == 7);
  std::istringstream csv(weight_csv(out));
  std::string line;
  int y = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    int x = 0;
    while (std::getline(row, cell, ',')) {
      CHECK(std::abs(png.at(0, y, x) - std::stod(cell)) <= 1.0 / 510.0 + 1e-12);
      ++x;
    }
    CHECK(x == 7);
    ++y;
  }
  CHECK(y == 9);
}

TEST_CASE("serialization of experts and fields") {
  TempDir dir("experts-io");
  Rng rng(1);
  const FusionModel f{init_mlp(MlpSpec{{54, 4, 1}, Activation::Relu, 0.5}, rng), 3, 3};
  CHECK(fusion_from_json(fusion_to_json(f)) == f);
  save_fusion(f, dir / "gate.json");
  CHECK(load_fusion(dir / "gate.json") == f);
  CHECK(kind_of([&] { fusion_from_json(model_to_json(f.gate)); }) == ErrorKind::SchemaError);

  std::mt19937_64 gen(3);
  const SoftmaxField s = random_field(5, 4, 3, gen);
  write_softmax_field(s, dir / "s.pfm");
  const SoftmaxField back = read_softmax_field(dir / "s.pfm", 3);
  REQUIRE(back.same_shape(s));
  // Stored as 32-bit floats.
  for (std::size_t i = 0; i < s.probs.size(); ++i) CHECK(back.probs[i] == static_cast<double>(static_cast<float>(s.probs[i])));
  CHECK(kind_of([&] { read_softmax_field(dir / "none.pfm", 3); }) == ErrorKind::MissingFile);
}
