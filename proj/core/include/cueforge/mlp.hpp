#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cueforge/raster.hpp"
#include "cueforge/rng.hpp"

namespace cueforge {

enum class Activation { Relu };

struct MlpSpec {
  std::vector<int> layer_widths;  // input, hidden..., output
  Activation activation = Activation::Relu;
  double init_scale = 0.1;

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int layer_count() const { return static_cast<int>(layer_widths.size()) - 1; }

  /// Throws BadSpec for fewer than two widths, non-positive widths or a
  /// negative init scale.
  void validate() const;
  /// Additionally requires an input of 1 to 3 channels and 1 or 2 hidden layers.
  void validate_color_expert() const;

  /// Parses "3,16,5".
  static MlpSpec parse(const std::string& widths, double init_scale = 0.1);
  std::string describe() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Parameters live in one flat vector: for each layer l the out x in weight
/// matrix (row-major) followed by the bias of length out.
struct MlpModel {
  MlpSpec spec;
  std::vector<double> params;

  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;
  std::span<const double> weights(int layer) const;
  std::span<const double> bias(int layer) const;
  std::span<double> weights(int layer);
  std::span<double> bias(int layer);

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

std::size_t parameter_count(const MlpSpec& spec);

/// Every weight and bias ~ U(-init_scale, init_scale), drawn in storage order.
MlpModel init_mlp(const MlpSpec& spec, Rng& rng);

/// Activations kept for the backward pass. acts[0] is the input batch,
/// acts[l+1] the output of layer l (post-ReLU for hidden layers, raw logits
/// for the last one).
struct ForwardTrace {
  std::size_t rows = 0;
  std::vector<std::vector<double>> acts;

  std::span<const double> logits() const { return acts.back(); }
};

ForwardTrace forward_trace(const MlpModel& m, std::span<const double> features, std::size_t rows);

/// Row-wise softmax in place with max subtraction.
void softmax_rows(std::span<double> values, std::size_t rows, int k);

struct ForwardResult {
  std::size_t rows = 0;
  int k = 0;
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Throws DimMismatch when features.size() != rows * input_dim.
ForwardResult forward(const MlpModel& m, std::span<const double> features, std::size_t rows);

/// Gradient of sum_i <dlogits_i, logits_i> with respect to the parameters.
std::vector<double> backward(const MlpModel& m, const ForwardTrace& trace,
                             std::span<const double> dlogits);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean cross-entropy of softmax(logits) against `labels` and its exact gradient.
LossGrad loss_and_grad(const MlpModel& m, std::span<const double> features,
                       std::span<const Label> labels);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad,
               double learning_rate, const AdamConfig& cfg);

enum class LrSchedule { Const, Poly };
std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& text);

/// Rate for `epoch` in [0, epochs): constant, or base * (1 - epoch/epochs)^power.
double scheduled_lr(double base, LrSchedule schedule, int epoch, int epochs, double power = 0.9);

/// Index of the largest value; the lowest index wins ties.
int argmax(std::span<const double> values);

}  // namespace cueforge
