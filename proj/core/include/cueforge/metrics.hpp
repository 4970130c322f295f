#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cueforge/raster.hpp"

namespace cueforge {

/// K x K pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const noexcept { return k_; }
  std::uint64_t at(int gt, int pred) const noexcept { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::uint64_t& at(int gt, int pred) noexcept { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::uint64_t total() const noexcept;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Adds counts[gt(p)][pred(p)] for every non-IGNORE ground-truth pixel.
/// Predictions must not be IGNORE there and must be < K.
void accumulate(ConfusionMatrix& cm, const LabelMask& pred, const LabelMask& gt);

/// TP / (TP + FP + FN) per class; nullopt when the denominator is zero.
std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm);

/// Mean over defined class IoUs. Throws AllUndefined when none is defined.
double miou(const ConfusionMatrix& cm);

enum class PixelRegion : std::uint8_t { Interior, Boundary, Ignore };

struct BoundaryMask {
  int height = 0;
  int width = 0;
  int radius = 0;
  std::vector<PixelRegion> flags;

  PixelRegion at(int y, int x) const noexcept { return flags[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count(PixelRegion region) const;
};

/// A labeled pixel is boundary iff some labeled pixel within Manhattan
/// distance `radius` carries a different class. IGNORE pixels are flagged
/// Ignore and never act as anchors; image borders are not boundaries.
BoundaryMask boundary_mask(const LabelMask& gt, int radius = 4);

struct SplitAccuracy {
  std::uint64_t interior_pixels = 0, interior_correct = 0;
  std::uint64_t boundary_pixels = 0, boundary_correct = 0;

  /// nullopt when the region is empty.
  std::optional<double> interior() const;
  std::optional<double> boundary() const;
  std::optional<double> overall() const;

  SplitAccuracy& operator+=(const SplitAccuracy& other);
};

SplitAccuracy split_accuracy(const LabelMask& pred, const LabelMask& gt, const BoundaryMask& bm);

struct GtSegment {
  Label class_id = 0;
  std::vector<std::size_t> pixels;  // flat indices, scanline order
  std::size_t area() const noexcept { return pixels.size(); }
};

/// 8-connected same-class components of the ground truth, IGNORE excluded.
std::vector<GtSegment> gt_segments(const LabelMask& gt);

/// Fraction of the segment's pixels predicted as its class.
double segment_recall(const GtSegment& segment, const LabelMask& pred);

struct SegmentRecord {
  Label class_id = 0;
  std::size_t area = 0;
  double recall = 0.0;
};

/// One record per ground-truth segment of `gt`.
std::vector<SegmentRecord> segment_records(const LabelMask& gt, const LabelMask& pred);

struct CoverageBin {
  std::size_t lower = 0;                 // exclusive, 0 for the first bin
  std::optional<std::size_t> upper;      // inclusive; nullopt for the overflow bin
  std::size_t count = 0;
  std::optional<double> mean_recall;
  std::optional<double> median_recall;
};

/// Bins segments by area: with thresholds t0 < t1 < ... < tn the bins are
/// (0, t0], (t0, t1], ..., (tn, inf). Throws EmptyBins for an empty or
/// non-increasing threshold list.
std::vector<CoverageBin> coverage_histogram(std::span<const SegmentRecord> records,
                                            std::span<const std::size_t> size_bins);

std::string coverage_csv(std::span<const CoverageBin> bins);

}  // namespace cueforge
