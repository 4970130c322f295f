#include "cueforge/metrics.hpp"

#include <algorithm>
#include <bitset>
#include <numeric>
#include <sstream>

#include "cueforge/components.hpp"
#include "cueforge/error.hpp"

namespace cueforge {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw Error(ErrorKind::InvalidParameter, "class count must be >= 0");
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw Error(ErrorKind::ShapeMismatch, "cannot merge confusion matrices of different K");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const LabelMask& pred, const LabelMask& gt) {
  if (!pred.same_size(gt)) {
    throw Error(ErrorKind::ShapeMismatch, "prediction " + std::to_string(pred.height()) + "x" +
                                              std::to_string(pred.width()) + " vs ground truth " +
                                              std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  const int k = cm.num_classes();
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const Label g = gt[i];
    if (g == kIgnoreLabel) continue;
    const Label p = pred[i];
    if (g >= k || p >= k) {
      throw Error(ErrorKind::SchemaError, "label " + std::to_string(g >= k ? g : p) + " outside " +
                                              std::to_string(k) + " classes");
    }
    ++cm.at(g, p);
  }
}

std::vector<std::optional<double>> class_iou(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  std::vector<std::optional<double>> out(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;
    if (denom > 0) out[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

double miou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : class_iou(cm)) {
    if (!v) continue;
    sum += *v;
    ++defined;
  }
  if (defined == 0) throw Error(ErrorKind::AllUndefined, "no class occurs in ground truth or prediction");
  return sum / defined;
}

std::size_t BoundaryMask::count(PixelRegion region) const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), region));
}

BoundaryMask boundary_mask(const LabelMask& gt, int radius) {
  if (radius < 1) throw Error(ErrorKind::InvalidParameter, "boundary radius must be >= 1");
  const int h = gt.height(), w = gt.width();
  const std::size_t n = gt.pixel_count();
  // The L1 ball of radius r is the r-fold dilation by the 4-neighbour cross,
  // so r rounds of cross dilation give the class set within distance r.
  using ClassSet = std::bitset<256>;
  std::vector<ClassSet> reach(n), next(n);
  for (std::size_t i = 0; i < n; ++i)
    if (gt[i] != kIgnoreLabel) reach[i].set(gt[i]);
  for (int round = 0; round < radius; ++round) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        ClassSet s = reach[i];
        if (x > 0) s |= reach[i - 1];
        if (x + 1 < w) s |= reach[i + 1];
        if (y > 0) s |= reach[i - w];
        if (y + 1 < h) s |= reach[i + w];
        next[i] = s;
      }
    }
    std::swap(reach, next);
  }
  BoundaryMask bm{h, w, radius, std::vector<PixelRegion>(n, PixelRegion::Interior)};
  for (std::size_t i = 0; i < n; ++i) {
    if (gt[i] == kIgnoreLabel) {
      bm.flags[i] = PixelRegion::Ignore;
      continue;
    }
    ClassSet others = reach[i];
    others.reset(gt[i]);
    if (others.any()) bm.flags[i] = PixelRegion::Boundary;
  }
  return bm;
}

namespace {
std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::optional<double> SplitAccuracy::interior() const { return ratio(interior_correct, interior_pixels); }
std::optional<double> SplitAccuracy::boundary() const { return ratio(boundary_correct, boundary_pixels); }
std::optional<double> SplitAccuracy::overall() const {
  return ratio(interior_correct + boundary_correct, interior_pixels + boundary_pixels);
}

SplitAccuracy& SplitAccuracy::operator+=(const SplitAccuracy& o) {
  interior_pixels += o.interior_pixels;
  interior_correct += o.interior_correct;
  boundary_pixels += o.boundary_pixels;
  boundary_correct += o.boundary_correct;
  return *this;
}

SplitAccuracy split_accuracy(const LabelMask& pred, const LabelMask& gt, const BoundaryMask& bm) {
  if (!pred.same_size(gt) || bm.height != gt.height() || bm.width != gt.width()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction, ground truth and boundary mask must share a size");
  }
  SplitAccuracy acc;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const bool correct = pred[i] == gt[i];
    switch (bm.flags[i]) {
      case PixelRegion::Interior:
        ++acc.interior_pixels;
        acc.interior_correct += correct;
        break;
      case PixelRegion::Boundary:
        ++acc.boundary_pixels;
        acc.boundary_correct += correct;
        break;
      case PixelRegion::Ignore:
        break;
    }
  }
  return acc;
}

std::vector<GtSegment> gt_segments(const LabelMask& gt) {
  const ComponentMap cm = label_components(gt);
  std::vector<GtSegment> out(cm.components.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].class_id = cm.components[i].class_id;
    out[i].pixels.reserve(cm.components[i].area);
  }
  for (std::size_t p = 0; p < cm.index.size(); ++p)
    if (cm.index[p] >= 0) out[static_cast<std::size_t>(cm.index[p])].pixels.push_back(p);
  return out;
}

double segment_recall(const GtSegment& segment, const LabelMask& pred) {
  if (segment.pixels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t p : segment.pixels) {
    if (p >= pred.pixel_count()) throw Error(ErrorKind::ShapeMismatch, "prediction does not cover the segment");
    hit += pred[p] == segment.class_id;
  }
  return static_cast<double>(hit) / static_cast<double>(segment.pixels.size());
}

std::vector<SegmentRecord> segment_records(const LabelMask& gt, const LabelMask& pred) {
  if (!pred.same_size(gt)) throw Error(ErrorKind::ShapeMismatch, "prediction and ground truth sizes differ");
  std::vector<SegmentRecord> out;
  for (const GtSegment& s : gt_segments(gt)) out.push_back({s.class_id, s.area(), segment_recall(s, pred)});
  return out;
}

std::vector<CoverageBin> coverage_histogram(std::span<const SegmentRecord> records,
                                            std::span<const std::size_t> size_bins) {
  if (size_bins.empty()) throw Error(ErrorKind::EmptyBins, "at least one size threshold is required");
  for (std::size_t i = 1; i < size_bins.size(); ++i) {
    if (size_bins[i] <= size_bins[i - 1]) throw Error(ErrorKind::EmptyBins, "size thresholds must be strictly increasing");
  }
  std::vector<CoverageBin> bins(size_bins.size() + 1);
  std::vector<std::vector<double>> recalls(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lower = b == 0 ? 0 : size_bins[b - 1];
    if (b < size_bins.size()) bins[b].upper = size_bins[b];
  }
  for (const SegmentRecord& r : records) {
    const std::size_t b = static_cast<std::size_t>(
        std::lower_bound(size_bins.begin(), size_bins.end(), r.area) - size_bins.begin());
    recalls[b].push_back(r.recall);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto& v = recalls[b];
    bins[b].count = v.size();
    if (v.empty()) continue;
    bins[b].mean_recall = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    bins[b].median_recall = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  }
  return bins;
}

std::string coverage_csv(std::span<const CoverageBin> bins) {
  std::ostringstream out;
  out.precision(10);
  out << "area_lower_exclusive,area_upper_inclusive,count,mean_recall,median_recall\n";
  for (const CoverageBin& b : bins) {
    out << b.lower << ',';
    if (b.upper) out << *b.upper;
    else out << "inf";
    out << ',' << b.count << ',';
    if (b.mean_recall) out << *b.mean_recall;
    out << ',';
    if (b.median_recall) out << *b.median_recall;
    out << '\n';
  }
  return out.str();
}

}  // namespace cueforge
