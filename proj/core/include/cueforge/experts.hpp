#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cueforge/color.hpp"
#include "cueforge/mlp.hpp"
#include "cueforge/raster.hpp"

namespace cueforge {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-2;
  AdamConfig adam;
  std::uint64_t rng_seed = 0;
  LrSchedule lr_schedule = LrSchedule::Const;
  /// Share of samples held out for the per-epoch accuracy log.
  double holdout_fraction = 0.1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  std::optional<double> holdout_accuracy;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
};

/// Minibatch Adam on mean cross-entropy. The generator derived from
/// cfg.rng_seed drives the holdout split, initialization and batch order.
TrainResult train_color_expert(const PixelDataset& ds, const MlpSpec& spec, const TrainConfig& cfg);

/// Fraction of rows in `ds` whose argmax prediction equals the label.
double pixel_accuracy(const MlpModel& m, const PixelDataset& ds);

/// H x W x K class probabilities, pixel-major.
struct SoftmaxField {
  int height = 0;
  int width = 0;
  int k = 0;
  std::vector<double> probs;

  SoftmaxField() = default;
  SoftmaxField(int h, int w, int classes) : height(h), width(w), k(classes), probs(static_cast<std::size_t>(h) * w * classes, 0.0) {}

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::span<const double> pixel(std::size_t i) const noexcept { return {probs.data() + i * k, static_cast<std::size_t>(k)}; }
  std::span<double> pixel(std::size_t i) noexcept { return {probs.data() + i * k, static_cast<std::size_t>(k)}; }
  bool same_shape(const SoftmaxField& o) const noexcept { return height == o.height && width == o.width && k == o.k; }

  /// Every pixel non-negative and summing to 1 within `tol`.
  bool is_simplex(double tol = 1e-6) const;
  LabelMask argmax_labels() const;
};

struct DensePrediction {
  SoftmaxField field;
  LabelMask labels;
};

/// Per-pixel forward pass over an image. Throws DimMismatch when the model
/// input does not match feature_dim(keep).
DensePrediction predict_dense(const MlpModel& m, const RasterImage& img, CueSet keep, GrayMode mode,
                              unsigned workers = 1);

/// predict_dense with a freshly initialized, untrained model.
DensePrediction no_info_baseline(const MlpSpec& spec, Rng& rng, const RasterImage& img, CueSet keep,
                                 GrayMode mode, unsigned workers = 1);

struct FusionConfig {
  TrainConfig train;
  int hidden = 16;
  double init_bound = 1e-3;
  /// 1 feeds the two softmax vectors of the pixel itself; 3 feeds its 3x3
  /// neighborhood (edge-clamped).
  int window = 1;

  void validate() const;
};

/// Gate over concatenated per-pixel softmaxes; w = logistic(gate output).
struct FusionModel {
  MlpModel gate;
  int k = 0;
  int window = 1;

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

/// Fills `out` (window^2 * 2K values) with the gate input for pixel (y, x).
void fusion_features(const SoftmaxField& sa, const SoftmaxField& sb, int window, int y, int x,
                     std::span<double> out);

struct FusionTrainResult {
  FusionModel model;
  std::vector<EpochLog> log;
};

/// Trains the gate on every non-IGNORE pixel with cross-entropy of the fused
/// distribution w*sa + (1-w)*sb.
FusionTrainResult train_fusion(std::span<const SoftmaxField> sa, std::span<const SoftmaxField> sb,
                               std::span<const LabelMask> gts, const FusionConfig& cfg);

struct FusionOutput {
  LabelMask labels;
  SoftmaxField fused;
  int height = 0;
  int width = 0;
  std::vector<double> weights;  // per pixel gate output in (0,1), row-major
};

FusionOutput fuse_predict(const FusionModel& f, const SoftmaxField& sa, const SoftmaxField& sb,
                          unsigned workers = 1);

/// Weight heatmap as an 8-bit grayscale raster (round(w*255)) and as CSV rows.
RasterImage weight_heatmap(const FusionOutput& out);
std::string weight_csv(const FusionOutput& out);

}  // namespace cueforge
