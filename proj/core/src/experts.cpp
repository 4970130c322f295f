#include "cueforge/experts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cueforge/error.hpp"
#include "cueforge/parallel.hpp"

namespace cueforge {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorKind::InvalidParameter, "epochs must be >= 0");
  if (batch_size == 0) throw Error(ErrorKind::InvalidParameter, "batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorKind::InvalidParameter, "learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw Error(ErrorKind::InvalidParameter, "Adam betas must lie in [0,1)");
  if (!(adam.epsilon > 0.0)) throw Error(ErrorKind::InvalidParameter, "Adam epsilon must be > 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw Error(ErrorKind::InvalidParameter, "holdout fraction must lie in [0,1)");
}

namespace {

double accuracy_on(const MlpModel& m, const PixelDataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  const int d = ds.feature_dim;
  std::vector<double> feats(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = ds.row(rows[i]);
    std::copy(src.begin(), src.end(), feats.begin() + i * d);
  }
  const ForwardTrace t = forward_trace(m, feats, rows.size());
  const int k = m.spec.output_dim();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    hit += argmax(t.logits().subspan(i * k, k)) == ds.labels[rows[i]];
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

}  // namespace

double pixel_accuracy(const MlpModel& m, const PixelDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return accuracy_on(m, ds, all);
}

TrainResult train_color_expert(const PixelDataset& ds, const MlpSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate_color_expert();
  if (ds.size() == 0) throw Error(ErrorKind::EmptyDataset, "pixel dataset is empty");
  if (spec.input_dim() != ds.feature_dim)
    throw Error(ErrorKind::DimMismatch, "spec input " + std::to_string(spec.input_dim()) + " vs feature dim " +
                                            std::to_string(ds.feature_dim));
  for (Label l : ds.labels)
    if (l >= spec.output_dim())
      throw Error(ErrorKind::DimMismatch, "label " + std::to_string(l) + " exceeds the " +
                                              std::to_string(spec.output_dim()) + "-class output");

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(Rng::derive(cfg.rng_seed, 0));
  split_rng.shuffle(std::span<std::size_t>(order));
  std::size_t n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(ds.size())));
  if (n_hold >= ds.size()) n_hold = ds.size() - 1;
  std::vector<std::size_t> holdout(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());

  Rng init_rng(Rng::derive(cfg.rng_seed, 1));
  TrainResult result{init_mlp(spec, init_rng), {}};
  AdamState state(result.model.params.size());
  Rng batch_rng(Rng::derive(cfg.rng_seed, 2));
  const int d = ds.feature_dim;
  std::vector<double> feats;
  std::vector<Label> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg.learning_rate, cfg.lr_schedule, epoch, cfg.epochs);
    batch_rng.shuffle(std::span<std::size_t>(train));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(train.size(), start + cfg.batch_size);
      feats.resize((end - start) * d);
      labels.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        auto src = ds.row(train[i]);
        std::copy(src.begin(), src.end(), feats.begin() + (i - start) * d);
        labels[i - start] = ds.labels[train[i]];
      }
      const LossGrad lg = loss_and_grad(result.model, feats, labels);
      loss_sum += lg.loss * static_cast<double>(end - start);
      adam_step(result.model.params, state, lg.grad, lr, cfg.adam);
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(train.size()), lr, std::nullopt};
    if (!holdout.empty()) entry.holdout_accuracy = accuracy_on(result.model, ds, holdout);
    result.log.push_back(entry);
  }
  return result;
}

bool SoftmaxField::is_simplex(double tol) const {
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    double sum = 0.0;
    for (double p : pixel(i)) {
      if (!(p >= 0.0)) return false;
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

LabelMask SoftmaxField::argmax_labels() const {
  LabelMask out(height, width);
  for (std::size_t i = 0; i < pixel_count(); ++i) out[i] = static_cast<Label>(argmax(pixel(i)));
  return out;
}

DensePrediction predict_dense(const MlpModel& m, const RasterImage& img, CueSet keep, GrayMode mode,
                              unsigned workers) {
  const int d = feature_dim(keep);
  if (m.spec.input_dim() != d)
    throw Error(ErrorKind::DimMismatch, "model expects " + std::to_string(m.spec.input_dim()) +
                                            " inputs but cue set " + keep.to_string() + " gives " +
                                            std::to_string(d));
  const int h = img.height(), w = img.width(), k = m.spec.output_dim();
  if (k > 255) throw Error(ErrorKind::BadSpec, "at most 255 classes fit a label mask");
  DensePrediction out{SoftmaxField(h, w, k), LabelMask(h, w)};
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t y) {
    std::vector<double> feats(static_cast<std::size_t>(w) * d);
    for (int x = 0; x < w; ++x)
      pixel_features(img, keep, mode, static_cast<int>(y), x, std::span<double>(feats).subspan(x * d, d));
    const ForwardResult r = forward(m, feats, static_cast<std::size_t>(w));
    const std::size_t base = y * static_cast<std::size_t>(w);
    std::copy(r.probs.begin(), r.probs.end(), out.field.probs.begin() + base * k);
    for (int x = 0; x < w; ++x)
      out.labels[base + x] = static_cast<Label>(argmax(std::span<const double>(r.logits).subspan(x * k, k)));
  });
  return out;
}

DensePrediction no_info_baseline(const MlpSpec& spec, Rng& rng, const RasterImage& img, CueSet keep,
                                 GrayMode mode, unsigned workers) {
  return predict_dense(init_mlp(spec, rng), img, keep, mode, workers);
}

void FusionConfig::validate() const {
  train.validate();
  if (hidden < 1) throw Error(ErrorKind::BadSpec, "gate hidden width must be >= 1");
  if (!(init_bound >= 0.0)) throw Error(ErrorKind::BadSpec, "gate init bound must be >= 0");
  if (window != 1 && window != 3) throw Error(ErrorKind::InvalidParameter, "fusion window must be 1 or 3");
}

void fusion_features(const SoftmaxField& sa, const SoftmaxField& sb, int window, int y, int x,
                     std::span<double> out) {
  const int r = window / 2;
  std::size_t o = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int yy = std::clamp(y + dy, 0, sa.height - 1);
      const int xx = std::clamp(x + dx, 0, sa.width - 1);
      const std::size_t i = static_cast<std::size_t>(yy) * sa.width + xx;
      for (double p : sa.pixel(i)) out[o++] = p;
      for (double p : sb.pixel(i)) out[o++] = p;
    }
  }
}

namespace {

void check_pair(const SoftmaxField& a, const SoftmaxField& b) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::ShapeMismatch, "expert fields differ: " + std::to_string(a.height) + "x" +
                                              std::to_string(a.width) + "x" + std::to_string(a.k) + " vs " +
                                              std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                                              std::to_string(b.k));
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

FusionTrainResult train_fusion(std::span<const SoftmaxField> sa, std::span<const SoftmaxField> sb,
                               std::span<const LabelMask> gts, const FusionConfig& cfg) {
  cfg.validate();
  if (sa.size() != sb.size() || sa.size() != gts.size())
    throw Error(ErrorKind::ShapeMismatch, "expert and ground-truth sequences differ in length");
  if (sa.empty()) throw Error(ErrorKind::EmptyDataset, "no fusion training images");
  const int k = sa[0].k;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    check_pair(sa[i], sb[i]);
    if (sa[i].k != k) throw Error(ErrorKind::ShapeMismatch, "experts disagree on the class count");
    if (gts[i].height() != sa[i].height || gts[i].width() != sa[i].width)
      throw Error(ErrorKind::ShapeMismatch, "ground truth " + std::to_string(i) + " does not match its fields");
  }

  const int d = cfg.window * cfg.window * 2 * k;
  std::vector<double> feats;
  std::vector<Label> labels;
  std::vector<double> pa, pb;  // probability of the true class under each expert
  std::vector<double> buf(d);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    for (int y = 0; y < sa[i].height; ++y) {
      for (int x = 0; x < sa[i].width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * sa[i].width + x;
        const Label g = gts[i][p];
        if (g == kIgnoreLabel) continue;
        if (g >= k) throw Error(ErrorKind::ShapeMismatch, "ground-truth label exceeds the class count");
        fusion_features(sa[i], sb[i], cfg.window, y, x, buf);
        feats.insert(feats.end(), buf.begin(), buf.end());
        labels.push_back(g);
        pa.push_back(sa[i].pixel(p)[g]);
        pb.push_back(sb[i].pixel(p)[g]);
      }
    }
  }
  if (labels.empty()) throw Error(ErrorKind::EmptyDataset, "ground truth has no labeled pixels");

  MlpSpec spec{{d, cfg.hidden, 1}, Activation::Relu, cfg.init_bound};
  Rng init_rng(Rng::derive(cfg.train.rng_seed, 1));
  FusionTrainResult result{{init_mlp(spec, init_rng), k, cfg.window}, {}};
  MlpModel& gate = result.model.gate;
  AdamState state(gate.params.size());
  Rng batch_rng(Rng::derive(cfg.train.rng_seed, 2));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> bfeats;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg.train.learning_rate, cfg.train.lr_schedule, epoch, cfg.train.epochs);
    batch_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
      const std::size_t n = end - start;
      bfeats.resize(n * d);
      for (std::size_t j = 0; j < n; ++j)
        std::copy_n(feats.begin() + order[start + j] * d, d, bfeats.begin() + j * d);
      const ForwardTrace t = forward_trace(gate, bfeats, n);
      std::vector<double> dz(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t s = order[start + j];
        const double w = logistic(t.logits()[j]);
        const double fused = std::max(w * pa[s] + (1.0 - w) * pb[s], 1e-12);
        loss_sum -= std::log(fused);
        dz[j] = -(pa[s] - pb[s]) * w * (1.0 - w) / fused / static_cast<double>(n);
      }
      adam_step(gate.params, state, backward(gate, t, dz), lr, cfg.train.adam);
    }
    result.log.push_back({epoch, loss_sum / static_cast<double>(order.size()), lr, std::nullopt});
  }
  return result;
}

FusionOutput fuse_predict(const FusionModel& f, const SoftmaxField& sa, const SoftmaxField& sb, unsigned workers) {
  check_pair(sa, sb);
  if (sa.k != f.k) throw Error(ErrorKind::ShapeMismatch, "fusion model was trained for " + std::to_string(f.k) + " classes");
  const int h = sa.height, w = sa.width, k = sa.k;
  const int d = f.window * f.window * 2 * k;
  if (f.gate.spec.input_dim() != d) throw Error(ErrorKind::DimMismatch, "gate input does not match window and class count");
  FusionOutput out{LabelMask(h, w), SoftmaxField(h, w, k), h, w, std::vector<double>(sa.pixel_count())};
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t y) {
    std::vector<double> feats(static_cast<std::size_t>(w) * d);
    for (int x = 0; x < w; ++x)
      fusion_features(sa, sb, f.window, static_cast<int>(y), x, std::span<double>(feats).subspan(x * d, d));
    const ForwardTrace t = forward_trace(f.gate, feats, static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) {
      const std::size_t i = y * static_cast<std::size_t>(w) + x;
      const double wt = logistic(t.logits()[x]);
      out.weights[i] = wt;
      auto fused = out.fused.pixel(i);
      auto a = sa.pixel(i);
      auto b = sb.pixel(i);
      for (int c = 0; c < k; ++c) fused[c] = wt * a[c] + (1.0 - wt) * b[c];
      out.labels[i] = static_cast<Label>(argmax(fused));
    }
  });
  return out;
}

RasterImage weight_heatmap(const FusionOutput& out) {
  RasterImage img(out.height, out.width, ColorSpace::GRAY);
  auto plane = img.plane(0);
  for (std::size_t i = 0; i < out.weights.size(); ++i) plane[i] = std::clamp(out.weights[i], 0.0, 1.0);
  return img;
}

std::string weight_csv(const FusionOutput& out) {
  std::ostringstream s;
  s.precision(17);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (x) s << ',';
      s << out.weights[static_cast<std::size_t>(y) * out.width + x];
    }
    s << '\n';
  }
  return s.str();
}

}  // namespace cueforge
