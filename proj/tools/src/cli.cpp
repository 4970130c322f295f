#include "cueforge/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cueforge/color.hpp"
#include "cueforge/dataset.hpp"
#include "cueforge/eed.hpp"
#include "cueforge/error.hpp"
#include "cueforge/experts.hpp"
#include "cueforge/image_io.hpp"
#include "cueforge/metrics.hpp"
#include "cueforge/mlp.hpp"
#include "cueforge/parallel.hpp"
#include "cueforge/serialize.hpp"
#include "cueforge/synthetic.hpp"
#include "cueforge/texture.hpp"

namespace cueforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string item_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.%s", i, ext);
  return buf;
}

std::string quote_arg(const std::string& a) {
  if (!a.empty() && a.find_first_of(" \t\n'\"\\$`;&|<>*?()[]{}#~") == std::string::npos) return a;
  std::string out = "'";
  for (char c : a) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

struct Context {
  std::vector<std::string> args;  // without the program name
  unsigned workers = 1;

  std::string command_line() const {
    std::string out = "cueforge";
    for (const auto& a : args) out += " " + quote_arg(a);
    return out;
  }
  std::string provenance(const std::string& params) const {
    return "command: " + command_line() + "\nparams: " + params;
  }
};

class Params {
 public:
  template <typename T>
  Params& add(const std::string& key, const T& value) {
    if (!first_) out_ << ' ';
    first_ = false;
    out_ << key << '=' << value;
    return *this;
  }
  Params& raw(const std::string& text) {
    if (!first_) out_ << ' ';
    first_ = false;
    out_ << text;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_ = [] {
    std::ostringstream s;
    s.precision(17);
    return s;
  }();
  bool first_ = true;
};

CueSet parse_keep(const std::string& text) {
  if (text == "v") return {false, false, true, false};
  if (text == "hs") return {false, false, false, true};
  if (text == "vhs") return {false, false, true, true};
  throw Error(ErrorKind::BadCueSet, "--keep must be v, hs or vhs, got '" + text + "'");
}

GrayMode parse_gray(const std::string& text) {
  if (text == "mean") return GrayMode::Mean;
  if (text == "max") return GrayMode::Max;
  throw Error(ErrorKind::InvalidParameter, "--gray must be mean or max, got '" + text + "'");
}

std::vector<LoadedItem> load_all(const DatasetManifest& m, unsigned workers) {
  std::vector<LoadedItem> items(m.items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) { items[i] = load_item(m, i); });
  return items;
}

std::vector<std::size_t> parse_bins(const std::string& text) {
  std::vector<std::size_t> bins;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      bins.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw Error(ErrorKind::EmptyBins, "cannot parse size bin '" + part + "'");
    }
  }
  return bins;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string read_json_text(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingInput, path.string());
  return read_text_file(path);
}

// ---------------------------------------------------------------- decompose color

struct ColorOpts {
  std::string manifest, out, keep = "vhs", gray = "mean";
};

int decompose_color(const Context& ctx, const ColorOpts& o) {
  const CueSet keep = parse_keep(o.keep);
  const GrayMode mode = parse_gray(o.gray);
  const DatasetManifest base = load_dataset(o.manifest);
  const fs::path out = o.out;
  fs::create_directories(out / "images");
  fs::create_directories(out / "masks");

  DatasetManifest derived = base;
  derived.name = base.name + "-" + o.keep;
  derived.cue_set = {base.cue_set.s, base.cue_set.t, base.cue_set.v && keep.v, base.cue_set.hs && keep.hs};
  derived.provenance = ctx.provenance(Params().add("op", "decompose-color").add("keep", o.keep).add("gray", o.gray)
                                          .add("neutral_value", kNeutralValue).str());
  derived.items.resize(base.items.size());
  parallel_for(base.items.size(), ctx.workers, [&](std::size_t i) {
    const LoadedItem item = load_item(base, i);
    const DatasetItem paths{out / "images" / item_name(i, "png"), out / "masks" / item_name(i, "png")};
    write_png_image(project_cues(item.image, keep, mode), paths.image);
    write_png_mask(item.mask, paths.mask);
    derived.items[i] = paths;
  });
  save_manifest(derived, out / "manifest.json");
  std::cerr << "decompose color: " << derived.items.size() << " items -> " << (out / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- decompose texture

struct TextureOpts {
  std::string manifest, out;
  std::uint64_t seed = 0;
  std::size_t min_pixels = kMinSegmentPixels;
  double seeds_per_mpx = 128.0;
  std::size_t n_seeds = 0;
  double balance_fraction = 0.5;
  int augmented_copies = 1;
  int mosaics_per_class = 2;
  int contour_images_per_class = 4;
};

int decompose_texture(const Context& ctx, const TextureOpts& o) {
  const DatasetManifest base = load_dataset(o.manifest);
  TextureConfig cfg;
  cfg.min_pixels = o.min_pixels;
  cfg.seeds_per_mpx = o.seeds_per_mpx;
  if (o.n_seeds > 0) cfg.n_seeds = o.n_seeds;
  cfg.balance_fraction = o.balance_fraction;
  cfg.augmented_copies = o.augmented_copies;
  cfg.mosaics_per_class = o.mosaics_per_class;
  cfg.contour_images_per_class = o.contour_images_per_class;
  const fs::path out = o.out;
  TextureDatasetResult r = generate_texture_dataset(base, cfg, o.seed, out, ctx.workers);
  Params p;
  p.add("op", "decompose-texture").add("seed", o.seed).add("min_pixels", cfg.min_pixels);
  if (cfg.n_seeds) p.add("n_seeds", *cfg.n_seeds);
  else p.add("seeds_per_mpx", cfg.seeds_per_mpx);
  p.add("balance_fraction", cfg.balance_fraction).add("augmented_copies", cfg.augmented_copies)
      .add("mosaics_per_class", cfg.mosaics_per_class).add("contour_images_per_class", cfg.contour_images_per_class)
      .add("crop_min", cfg.augment.crop_min).add("shift", cfg.augment.shift).add("scale_min", cfg.augment.scale_min)
      .add("scale_max", cfg.augment.scale_max).add("max_angle_deg", cfg.augment.max_angle_deg);
  r.manifest.provenance = ctx.provenance(p.str());
  r.manifest.rng_seed = o.seed;
  save_manifest(r.manifest, out / "manifest.json");
  std::cerr << "decompose texture: " << r.manifest.items.size() << " items, " << r.pool.patch_count()
            << " pooled patches -> " << (out / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- decompose eed

struct EedOpts {
  std::string manifest, out, diffusivity = "pm";
  DiffusionParams params;
  int tensor_refresh = 1;
  int snapshot_every = 0;
  bool allow_unstable = false;
};

int decompose_eed(const Context& ctx, EedOpts o) {
  o.params.diffusivity = parse_diffusivity(o.diffusivity);
  o.params.validate(o.allow_unstable);
  if (o.tensor_refresh < 1) throw Error(ErrorKind::InvalidParameter, "--tensor-refresh must be >= 1");
  if (o.snapshot_every < 0) throw Error(ErrorKind::InvalidParameter, "--snapshot-every must be >= 0");
  const DatasetManifest base = load_dataset(o.manifest);
  const fs::path out = o.out;
  fs::create_directories(out / "images");
  fs::create_directories(out / "masks");
  if (o.snapshot_every > 0) fs::create_directories(out / "snapshots");

  DatasetManifest derived = base;
  derived.name = base.name + "-eed";
  derived.cue_set = {base.cue_set.s, false, base.cue_set.v, base.cue_set.hs};
  derived.provenance = ctx.provenance(Params().add("op", "decompose-eed").raw(o.params.describe())
                                          .add("tensor_refresh", o.tensor_refresh)
                                          .add("allow_unstable", o.allow_unstable).str());
  derived.items.resize(base.items.size());
  // Whole images run in parallel when there are enough of them; otherwise
  // each solve splits its rows over the workers.
  const bool per_item = base.items.size() >= ctx.workers;
  const unsigned outer = per_item ? ctx.workers : 1;
  const unsigned inner = per_item ? 1 : ctx.workers;
  parallel_for(base.items.size(), outer, [&](std::size_t i) {
    const LoadedItem item = load_item(base, i);
    EedObserver observer;
    if (o.snapshot_every > 0) {
      observer = [&, i](int step, const RasterImage& current) {
        if (step % o.snapshot_every != 0) return;
        char name[48];
        std::snprintf(name, sizeof name, "%06zu_%06d.pfm", i, step);
        write_pfm(current, out / "snapshots" / name);
      };
    }
    RasterImage smooth = run_eed(item.image, o.params, o.tensor_refresh, inner, observer);
    for (double& v : smooth.data()) v = std::clamp(v, 0.0, 1.0);
    const DatasetItem paths{out / "images" / item_name(i, "png"), out / "masks" / item_name(i, "png")};
    write_png_image(smooth, paths.image);
    write_png_mask(item.mask, paths.mask);
    derived.items[i] = paths;
  });
  save_manifest(derived, out / "manifest.json");
  std::cerr << "decompose eed: " << derived.items.size() << " items, " << o.params.n_steps << " steps -> "
            << (out / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train-color

struct TrainOpts {
  std::string manifest, out, keep = "vhs", gray = "mean", spec = "3,16,K", schedule = "const", predict;
  std::uint64_t seed = 0;
  int epochs = 100;
  std::size_t batch_size = 1024;
  std::size_t samples_per_image = 4096;
  double learning_rate = 1e-2;
  double holdout = 0.1;
  double init_scale = 0.1;
};

std::string substitute_k(const std::string& spec, int k) {
  std::string out;
  std::stringstream in(spec);
  std::string part;
  bool first = true;
  while (std::getline(in, part, ',')) {
    if (!first) out += ',';
    first = false;
    out += part == "K" ? std::to_string(k) : part;
  }
  return out;
}

void write_training_log(const fs::path& path, const std::vector<EpochLog>& log) {
  std::ostringstream s;
  s.precision(10);
  s << "epoch,mean_loss,learning_rate,holdout_accuracy\n";
  for (const EpochLog& e : log) {
    s << e.epoch << ',' << e.mean_loss << ',' << e.learning_rate << ',';
    if (e.holdout_accuracy) s << *e.holdout_accuracy;
    s << '\n';
  }
  write_text_file(path, s.str());
}

int train_color(const Context& ctx, const TrainOpts& o) {
  const CueSet keep = parse_keep(o.keep);
  const GrayMode mode = parse_gray(o.gray);
  const DatasetManifest base = load_dataset(o.manifest);
  const int k = base.class_table.size();
  MlpSpec spec = MlpSpec::parse(substitute_k(o.spec, k), o.init_scale);
  spec.validate_color_expert();
  if (spec.output_dim() != k)
    throw Error(ErrorKind::BadSpec, "spec " + spec.describe() + " ends in " + std::to_string(spec.output_dim()) +
                                        " outputs but the dataset has " + std::to_string(k) + " classes");
  if (spec.input_dim() != feature_dim(keep))
    throw Error(ErrorKind::DimMismatch, "spec " + spec.describe() + " takes " + std::to_string(spec.input_dim()) +
                                            " inputs but --keep " + o.keep + " gives " +
                                            std::to_string(feature_dim(keep)));
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.learning_rate;
  cfg.rng_seed = o.seed;
  cfg.lr_schedule = parse_lr_schedule(o.schedule);
  cfg.holdout_fraction = o.holdout;
  cfg.validate();
  if (o.samples_per_image == 0) throw Error(ErrorKind::InvalidParameter, "--samples-per-image must be >= 1");

  std::vector<std::pair<RasterImage, LabelMask>> pairs;
  for (LoadedItem& it : load_all(base, ctx.workers)) pairs.emplace_back(std::move(it.image), std::move(it.mask));
  const PixelDataset ds = build_pixel_dataset(pairs, keep, mode, o.samples_per_image, o.seed, ctx.workers);
  const TrainResult trained = train_color_expert(ds, spec, cfg);

  const fs::path out = o.out;
  save_model(trained.model, out / "model.json");
  write_training_log(out / "training_log.csv", trained.log);

  const DatasetManifest target = o.predict.empty() ? base : load_dataset(o.predict);
  if (target.class_table.size() != k)
    throw Error(ErrorKind::SchemaError, "prediction manifest has a different class count");
  fs::create_directories(out / "pred");
  fs::create_directories(out / "softmax");
  DatasetManifest derived = target;
  derived.name = target.name + "-color-" + o.keep;
  derived.cue_set = {false, false, keep.v, keep.hs};
  derived.rng_seed = o.seed;
  derived.provenance = ctx.provenance(Params().add("op", "train-color").add("keep", o.keep).add("gray", o.gray)
                                          .add("spec", spec.describe()).add("init_scale", spec.init_scale)
                                          .add("epochs", cfg.epochs).add("batch_size", cfg.batch_size)
                                          .add("learning_rate", cfg.learning_rate)
                                          .add("schedule", to_string(cfg.lr_schedule))
                                          .add("beta1", cfg.adam.beta1).add("beta2", cfg.adam.beta2)
                                          .add("epsilon", cfg.adam.epsilon).add("holdout", cfg.holdout_fraction)
                                          .add("samples_per_image", o.samples_per_image).add("seed", o.seed)
                                          .add("train_manifest", o.manifest).str());
  for (std::size_t i = 0; i < target.items.size(); ++i) {
    const LoadedItem item = load_item(target, i);
    const DensePrediction pred = predict_dense(trained.model, item.image, keep, mode, ctx.workers);
    const fs::path mask_path = out / "pred" / item_name(i, "png");
    write_png_mask(pred.labels, mask_path);
    write_softmax_field(pred.field, out / "softmax" / item_name(i, "pfm"));
    derived.items[i] = {target.items[i].image, mask_path};
  }
  save_manifest(derived, out / "manifest.json");
  std::cerr << "train-color: " << ds.size() << " samples, " << cfg.epochs << " epochs";
  if (!trained.log.empty() && trained.log.back().holdout_accuracy)
    std::cerr << ", holdout accuracy " << *trained.log.back().holdout_accuracy;
  std::cerr << " -> " << (out / "model.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvalOpts {
  std::string pred, manifest, report, bins = "64,256,1024,4096,16384";
  int radius = 4;
};

int evaluate(const Context& ctx, const EvalOpts& o) {
  const DatasetManifest gt = load_dataset(o.manifest);
  const std::vector<std::size_t> bins = parse_bins(o.bins);
  if (o.radius < 1) throw Error(ErrorKind::InvalidParameter, "--boundary-radius must be >= 1");
  const int k = gt.class_table.size();
  const fs::path pred_dir = o.pred;

  struct PerItem {
    ConfusionMatrix cm;
    SplitAccuracy acc;
    std::vector<SegmentRecord> records;
  };
  std::vector<PerItem> parts(gt.items.size());
  parallel_for(gt.items.size(), ctx.workers, [&](std::size_t i) {
    const LoadedItem item = load_item(gt, i);
    const fs::path pred_path = pred_dir / "pred" / item_name(i, "png");
    if (!fs::exists(pred_path)) throw Error(ErrorKind::MissingFile, pred_path.string());
    const LabelMask pred = read_png_mask(pred_path);
    PerItem part{ConfusionMatrix(k), {}, {}};
    accumulate(part.cm, pred, item.mask);
    part.acc = split_accuracy(pred, item.mask, boundary_mask(item.mask, o.radius));
    part.records = segment_records(item.mask, pred);
    parts[i] = std::move(part);
  });
  ConfusionMatrix cm(k);
  SplitAccuracy acc;
  std::vector<SegmentRecord> records;
  for (const PerItem& p : parts) {
    cm += p.cm;
    acc += p.acc;
    records.insert(records.end(), p.records.begin(), p.records.end());
  }
  const auto coverage = coverage_histogram(records, bins);

  const fs::path report = o.report;
  const fs::path coverage_path = report.parent_path() / (report.stem().string() + "_coverage.csv");
  write_text_file(coverage_path, coverage_csv(coverage));

  json ious = json::array();
  for (const auto& v : class_iou(cm)) ious.push_back(optional_json(v));
  std::optional<double> mean;
  try {
    mean = miou(cm);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AllUndefined) throw;
  }
  json names = json::array();
  for (const ClassEntry& c : gt.class_table.entries()) names.push_back(c.name);
  json confusion = json::array();
  for (int g = 0; g < k; ++g) {
    json row = json::array();
    for (int p = 0; p < k; ++p) row.push_back(cm.at(g, p));
    confusion.push_back(row);
  }
  const json doc = {
      {"format", "cueforge-evaluation"},
      {"provenance", ctx.provenance(Params().add("op", "evaluate").add("boundary_radius", o.radius)
                                        .add("size_bins", o.bins).str())},
      {"manifest", o.manifest},
      {"pred", o.pred},
      {"boundary_radius", o.radius},
      {"classes", names},
      {"class_iou", ious},
      {"miou", optional_json(mean)},
      {"accuracy",
       {{"interior", optional_json(acc.interior())},
        {"boundary", optional_json(acc.boundary())},
        {"overall", optional_json(acc.overall())}}},
      {"pixel_counts",
       {{"interior", acc.interior_pixels},
        {"interior_correct", acc.interior_correct},
        {"boundary", acc.boundary_pixels},
        {"boundary_correct", acc.boundary_correct}}},
      {"confusion", confusion},
      {"size_bins", bins},
      {"segments", records.size()},
      {"coverage_csv", coverage_path.filename().string()},
  };
  write_text_file(report, doc.dump(2) + "\n");
  std::cerr << "evaluate: mIoU ";
  if (mean) std::cerr << *mean;
  else std::cerr << "undefined";
  std::cerr << " over " << gt.items.size() << " items -> " << report.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- fuse

struct FuseOpts {
  std::string expert_a, expert_b, gt, out;
  std::uint64_t seed = 0;
  int epochs = 100;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-2;
  int window = 1;
  int hidden = 16;
  double init_bound = 1e-3;
};

int fuse(const Context& ctx, const FuseOpts& o) {
  const DatasetManifest gt = load_dataset(o.gt);
  const int k = gt.class_table.size();
  FusionConfig cfg;
  cfg.train.epochs = o.epochs;
  cfg.train.batch_size = o.batch_size;
  cfg.train.learning_rate = o.learning_rate;
  cfg.train.rng_seed = o.seed;
  cfg.train.holdout_fraction = 0.0;
  cfg.window = o.window;
  cfg.hidden = o.hidden;
  cfg.init_bound = o.init_bound;
  cfg.validate();

  const std::size_t n = gt.items.size();
  std::vector<SoftmaxField> sa(n), sb(n);
  std::vector<LabelMask> masks(n);
  auto field_path = [](const std::string& dir, std::size_t i) { return fs::path(dir) / "softmax" / item_name(i, "pfm"); };
  parallel_for(n, ctx.workers, [&](std::size_t i) {
    for (const auto& [dir, dst] : {std::pair{&o.expert_a, &sa}, std::pair{&o.expert_b, &sb}}) {
      const fs::path p = field_path(*dir, i);
      if (!fs::exists(p)) throw Error(ErrorKind::MissingFile, p.string());
      (*dst)[i] = read_softmax_field(p, k);
    }
    masks[i] = load_item(gt, i).mask;
  });
  const FusionTrainResult trained = train_fusion(sa, sb, masks, cfg);

  const fs::path out = o.out;
  save_fusion(trained.model, out / "model.json");
  write_training_log(out / "training_log.csv", trained.log);
  fs::create_directories(out / "pred");
  fs::create_directories(out / "softmax");
  fs::create_directories(out / "heatmap");
  DatasetManifest derived = gt;
  derived.name = gt.name + "-fused";
  derived.rng_seed = o.seed;
  derived.provenance = ctx.provenance(Params().add("op", "fuse").add("expert_a", o.expert_a).add("expert_b", o.expert_b)
                                          .add("seed", o.seed).add("epochs", o.epochs).add("batch_size", o.batch_size)
                                          .add("learning_rate", o.learning_rate).add("window", o.window)
                                          .add("hidden", o.hidden).add("init_bound", o.init_bound).str());
  for (std::size_t i = 0; i < n; ++i) {
    const FusionOutput f = fuse_predict(trained.model, sa[i], sb[i], ctx.workers);
    const fs::path mask_path = out / "pred" / item_name(i, "png");
    write_png_mask(f.labels, mask_path);
    write_softmax_field(f.fused, out / "softmax" / item_name(i, "pfm"));
    write_png_image(weight_heatmap(f), out / "heatmap" / item_name(i, "png"));
    write_text_file(out / "heatmap" / item_name(i, "csv"), weight_csv(f));
    derived.items[i].mask = mask_path;
  }
  save_manifest(derived, out / "manifest.json");
  std::cerr << "fuse: " << n << " items -> " << (out / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- report

struct ReportOpts {
  std::vector<std::string> evals, labels, heatmaps;
  std::string out;
};

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  std::ostringstream s;
  s.precision(10);
  s << v.get<double>();
  return s.str();
}

int report(const Context& ctx, const ReportOpts& o) {
  if (!o.labels.empty() && o.labels.size() != o.evals.size())
    throw Error(ErrorKind::InvalidParameter, "--label must be given once per --eval");
  std::vector<json> docs;
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < o.evals.size(); ++r) {
    try {
      docs.push_back(json::parse(read_json_text(o.evals[r])));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::SchemaError, o.evals[r] + ": " + e.what());
    }
    labels.push_back(o.labels.empty() ? "run" + std::to_string(r) : o.labels[r]);
  }
  const fs::path out = o.out;
  fs::create_directories(out);

  try {
    const json& names = docs.front().at("classes");
    for (const json& d : docs)
      if (d.at("classes") != names) throw Error(ErrorKind::SchemaError, "evaluations disagree on the class table");

    std::ostringstream iou;
    iou << "class_id,class_name";
    for (const auto& l : labels) iou << ',' << l;
    iou << '\n';
    for (std::size_t c = 0; c < names.size(); ++c) {
      iou << c << ',' << names[c].get<std::string>();
      for (const json& d : docs) iou << ',' << csv_value(d.at("class_iou").at(c));
      iou << '\n';
    }
    write_text_file(out / "per_class_iou.csv", iou.str());

    std::ostringstream accs;
    accs << "run,interior,boundary,overall,miou\n";
    json runs = json::array();
    for (std::size_t r = 0; r < docs.size(); ++r) {
      const json& a = docs[r].at("accuracy");
      accs << labels[r] << ',' << csv_value(a.at("interior")) << ',' << csv_value(a.at("boundary")) << ','
           << csv_value(a.at("overall")) << ',' << csv_value(docs[r].at("miou")) << '\n';
      const fs::path src = fs::path(o.evals[r]).parent_path() / docs[r].at("coverage_csv").get<std::string>();
      const std::string coverage_name = "coverage_" + labels[r] + ".csv";
      write_text_file(out / coverage_name, read_json_text(src));
      runs.push_back({{"label", labels[r]},
                      {"evaluation", o.evals[r]},
                      {"miou", docs[r].at("miou")},
                      {"accuracy", a},
                      {"coverage_csv", coverage_name}});
    }
    write_text_file(out / "accuracy.csv", accs.str());

    json heatmaps = json::array();
    for (std::size_t h = 0; h < o.heatmaps.size(); ++h) {
      const fs::path src = fs::path(o.heatmaps[h]) / "heatmap";
      if (!fs::is_directory(src)) throw Error(ErrorKind::MissingInput, src.string());
      std::vector<fs::path> pngs;
      for (const auto& e : fs::directory_iterator(src))
        if (e.path().extension() == ".png") pngs.push_back(e.path());
      std::sort(pngs.begin(), pngs.end());
      const fs::path dst = out / "heatmaps" / std::to_string(h);
      fs::create_directories(dst);
      json files = json::array();
      for (const fs::path& p : pngs) {
        fs::copy_file(p, dst / p.filename(), fs::copy_options::overwrite_existing);
        files.push_back(fs::path("heatmaps" / fs::path(std::to_string(h)) / p.filename()).generic_string());
      }
      heatmaps.push_back({{"source", o.heatmaps[h]}, {"files", files}});
    }

    const json index = {
        {"format", "cueforge-report"},
        {"provenance", ctx.provenance(Params().add("op", "report").add("runs", docs.size())
                                          .add("heatmap_dirs", o.heatmaps.size()).str())},
        {"classes", names},
        {"per_class_iou_csv", "per_class_iou.csv"},
        {"accuracy_csv", "accuracy.csv"},
        {"runs", runs},
        {"heatmaps", heatmaps},
    };
    write_text_file(out / "index.json", index.dump(2) + "\n");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("malformed evaluation report: ") + e.what());
  }
  std::cerr << "report: " << docs.size() << " runs -> " << (out / "index.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- validate

struct ValidateOpts {
  std::string manifest, report;
};

int validate(const Context& ctx, const ValidateOpts& o) {
  const DatasetManifest m = load_dataset(o.manifest);
  struct Row {
    std::string problem;
    ValidationReport report;
  };
  std::vector<Row> rows(m.items.size());
  parallel_for(m.items.size(), ctx.workers, [&](std::size_t i) {
    const RasterImage img = read_png_image(m.items[i].image);
    const LabelMask mask = read_png_mask(m.items[i].mask);
    if (!mask.same_size(img)) {
      rows[i].problem = "image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) + " vs mask " +
                        std::to_string(mask.height()) + "x" + std::to_string(mask.width());
    }
    rows[i].report = validate_mask(mask, m.class_table);
  });
  std::size_t bad = 0;
  json items = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    json violations = json::array();
    for (const LabelViolation& v : r.report.violations) {
      violations.push_back({{"label", v.label}, {"count", v.count}, {"first_y", v.first_y}, {"first_x", v.first_x}});
      std::cerr << "item " << i << ": label " << int(v.label) << " outside " << m.class_table.size()
                << " classes (" << v.count << " pixels, first at y=" << v.first_y << " x=" << v.first_x << ")\n";
    }
    if (!r.problem.empty()) std::cerr << "item " << i << ": " << r.problem << "\n";
    if (!r.problem.empty() || !r.report.valid()) ++bad;
    items.push_back({{"index", i},
                     {"class_counts", r.report.class_counts},
                     {"ignore", r.report.ignore_count},
                     {"dimension_problem", r.problem.empty() ? json(nullptr) : json(r.problem)},
                     {"violations", violations}});
  }
  if (!o.report.empty()) {
    const json doc = {{"format", "cueforge-validation"}, {"manifest", o.manifest}, {"items", items},
                      {"invalid_items", bad}};
    write_text_file(o.report, doc.dump(2) + "\n");
  }
  std::cerr << "validate: " << m.items.size() << " items, " << bad << " invalid\n";
  return bad == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  SyntheticConfig cfg;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  std::string out;
};

int synth(const Context& ctx, const SynthOpts& o) {
  const DatasetManifest m = write_synthetic_dataset(
      o.cfg, o.count, o.seed, o.out,
      ctx.provenance(Params().add("op", "synth").add("classes", o.cfg.num_classes).add("count", o.count)
                         .add("height", o.cfg.height).add("width", o.cfg.width).add("regions", o.cfg.regions)
                         .add("noise", o.cfg.noise).add("ignore_border", o.cfg.ignore_border)
                         .add("seed", o.seed).str()));
  std::cerr << "synth: " << m.items.size() << " items -> " << (fs::path(o.out) / "manifest.json").string() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

namespace {

int dispatch(int argc, const char* const* argv) {
  Context ctx;
  for (int i = 1; i < argc; ++i) ctx.args.emplace_back(argv[i]);

  CLI::App app{"Cue decomposition, expert training and evaluation for semantic segmentation datasets", "cueforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto add_workers = [&](CLI::App* sub) {
    sub->add_option("--workers", ctx.workers, "Worker threads (default 1)")
        ->envname("CUEFORGE_WORKERS")
        ->check(CLI::Range(1u, 1024u));
  };

  std::function<int()> action;

  CLI::App* decompose = app.add_subcommand("decompose", "Derive a cue-restricted dataset");
  decompose->require_subcommand(1);

  ColorOpts color_opts;
  CLI::App* color = decompose->add_subcommand("color", "Keep gray value and/or chroma");
  color->add_option("manifest", color_opts.manifest, "Input manifest")->required();
  color->add_option("--out", color_opts.out, "Output directory")->required();
  color->add_option("--keep", color_opts.keep, "v, hs or vhs")->capture_default_str();
  color->add_option("--gray", color_opts.gray, "mean or max")->capture_default_str();
  add_workers(color);
  color->callback([&] { action = [&] { return decompose_color(ctx, color_opts); }; });

  TextureOpts tex_opts;
  CLI::App* texture = decompose->add_subcommand("texture", "Voronoi texture surrogate dataset");
  texture->add_option("manifest", tex_opts.manifest, "Base manifest")->required();
  texture->add_option("--out", tex_opts.out, "Output directory")->required();
  texture->add_option("--seed", tex_opts.seed, "Global seed")->required();
  texture->add_option("--min-pixels", tex_opts.min_pixels, "Smallest segment kept as a patch")->capture_default_str();
  texture->add_option("--seeds-per-mpx", tex_opts.seeds_per_mpx, "Voronoi seeds per megapixel")->capture_default_str();
  texture->add_option("--n-seeds", tex_opts.n_seeds, "Fixed Voronoi seed count (overrides --seeds-per-mpx)");
  texture->add_option("--balance-fraction", tex_opts.balance_fraction, "Per-class area floor relative to the largest class")
      ->capture_default_str();
  texture->add_option("--augmented-copies", tex_opts.augmented_copies, "Augmented copies per patch")->capture_default_str();
  texture->add_option("--mosaics-per-class", tex_opts.mosaics_per_class)->capture_default_str();
  texture->add_option("--contour-images-per-class", tex_opts.contour_images_per_class)->capture_default_str();
  add_workers(texture);
  texture->callback([&] { action = [&] { return decompose_texture(ctx, tex_opts); }; });

  EedOpts eed_opts;
  CLI::App* eed = decompose->add_subcommand("eed", "Edge-enhancing diffusion (removes texture)");
  eed->add_option("manifest", eed_opts.manifest, "Input manifest")->required();
  eed->add_option("--out", eed_opts.out, "Output directory")->required();
  eed->add_option("--lambda", eed_opts.params.lambda, "Contrast parameter")->capture_default_str();
  eed->add_option("--kernel", eed_opts.params.kernel_size, "Gaussian kernel size (odd)")->capture_default_str();
  eed->add_option("--sigma", eed_opts.params.sigma, "Presmoothing standard deviation")->capture_default_str();
  auto* rho = eed->add_option("--rho", eed_opts.params.rho, "Orientation smoothing (defaults to --sigma)");
  eed->add_option("--tau", eed_opts.params.tau, "Time step")->capture_default_str();
  eed->add_option("--spacing", eed_opts.params.h, "Grid spacing h")->capture_default_str();
  eed->add_option("--steps", eed_opts.params.n_steps, "Number of explicit steps")->capture_default_str();
  eed->add_option("--alpha", eed_opts.params.alpha, "Stencil parameter in [0,0.5]")->capture_default_str();
  eed->add_option("--beta", eed_opts.params.beta, "Stencil parameter")->capture_default_str();
  eed->add_option("--diffusivity", eed_opts.diffusivity, "pm or weickert")->capture_default_str();
  eed->add_option("--tensor-refresh", eed_opts.tensor_refresh, "Recompute the tensor every N steps")->capture_default_str();
  eed->add_option("--snapshot-every", eed_opts.snapshot_every, "Write PFM intermediates every N steps");
  eed->add_flag("--allow-unstable", eed_opts.allow_unstable, "Skip the explicit stability checks");
  add_workers(eed);
  eed->callback([&] {
    if (rho->count() == 0) eed_opts.params.rho = eed_opts.params.sigma;
    action = [&] { return decompose_eed(ctx, eed_opts); };
  });

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train-color", "Train a per-pixel color expert");
  train->add_option("manifest", train_opts.manifest, "Training manifest")->required();
  train->add_option("--out", train_opts.out, "Output directory")->required();
  train->add_option("--seed", train_opts.seed, "Global seed")->required();
  train->add_option("--keep", train_opts.keep, "v, hs or vhs")->capture_default_str();
  train->add_option("--gray", train_opts.gray, "mean or max")->capture_default_str();
  train->add_option("--spec", train_opts.spec, "Layer widths; K stands for the class count")->capture_default_str();
  train->add_option("--epochs", train_opts.epochs, "Epochs (0 gives the untrained baseline)")->capture_default_str();
  train->add_option("--batch-size", train_opts.batch_size)->capture_default_str();
  train->add_option("--lr", train_opts.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--schedule", train_opts.schedule, "const or poly")->capture_default_str();
  train->add_option("--holdout", train_opts.holdout, "Held-out share for the epoch log")->capture_default_str();
  train->add_option("--init-scale", train_opts.init_scale, "Uniform init bound")->capture_default_str();
  train->add_option("--samples-per-image", train_opts.samples_per_image)->capture_default_str();
  train->add_option("--predict", train_opts.predict, "Manifest to predict on (defaults to the training manifest)");
  add_workers(train);
  train->callback([&] { action = [&] { return train_color(ctx, train_opts); }; });

  EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval->add_option("--pred", eval_opts.pred, "Prediction directory (reads pred/NNNNNN.png)")->required();
  eval->add_option("--manifest", eval_opts.manifest, "Ground-truth manifest")->required();
  eval->add_option("--report", eval_opts.report, "Output JSON report")->required();
  eval->add_option("--boundary-radius", eval_opts.radius, "Manhattan radius")->capture_default_str();
  eval->add_option("--size-bins", eval_opts.bins, "Segment area thresholds")->capture_default_str();
  add_workers(eval);
  eval->callback([&] { action = [&] { return evaluate(ctx, eval_opts); }; });

  FuseOpts fuse_opts;
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "Train a pixel-wise gate over two experts");
  fuse_cmd->add_option("--expert-a", fuse_opts.expert_a, "First expert directory (reads softmax/)")->required();
  fuse_cmd->add_option("--expert-b", fuse_opts.expert_b, "Second expert directory")->required();
  fuse_cmd->add_option("--gt", fuse_opts.gt, "Ground-truth manifest")->required();
  fuse_cmd->add_option("--out", fuse_opts.out, "Output directory")->required();
  fuse_cmd->add_option("--seed", fuse_opts.seed, "Global seed")->required();
  fuse_cmd->add_option("--epochs", fuse_opts.epochs)->capture_default_str();
  fuse_cmd->add_option("--batch-size", fuse_opts.batch_size)->capture_default_str();
  fuse_cmd->add_option("--lr", fuse_opts.learning_rate)->capture_default_str();
  fuse_cmd->add_option("--window", fuse_opts.window, "1 or 3")->capture_default_str();
  fuse_cmd->add_option("--hidden", fuse_opts.hidden)->capture_default_str();
  fuse_cmd->add_option("--init-bound", fuse_opts.init_bound)->capture_default_str();
  add_workers(fuse_cmd);
  fuse_cmd->callback([&] { action = [&] { return fuse(ctx, fuse_opts); }; });

  ReportOpts report_opts;
  CLI::App* report_cmd = app.add_subcommand("report", "Collect evaluations into CSV/JSON/PNG");
  report_cmd->add_option("--eval", report_opts.evals, "Evaluation JSON (repeatable)")->required();
  report_cmd->add_option("--label", report_opts.labels, "Column label per --eval");
  report_cmd->add_option("--heatmaps", report_opts.heatmaps, "Fusion output directory (repeatable)");
  report_cmd->add_option("--out", report_opts.out, "Output directory")->required();
  report_cmd->callback([&] { action = [&] { return report(ctx, report_opts); }; });

  ValidateOpts validate_opts;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Check a manifest and its masks");
  validate_cmd->add_option("manifest", validate_opts.manifest)->required();
  validate_cmd->add_option("--report", validate_opts.report, "Write per-item counts as JSON");
  add_workers(validate_cmd);
  validate_cmd->callback([&] { action = [&] { return validate(ctx, validate_opts); }; });

  SynthOpts synth_opts;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a procedural labeled dataset");
  synth_cmd->add_option("--out", synth_opts.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_opts.seed, "Global seed")->required();
  synth_cmd->add_option("--count", synth_opts.count)->capture_default_str();
  synth_cmd->add_option("--classes", synth_opts.cfg.num_classes)->capture_default_str();
  synth_cmd->add_option("--height", synth_opts.cfg.height)->capture_default_str();
  synth_cmd->add_option("--width", synth_opts.cfg.width)->capture_default_str();
  synth_cmd->add_option("--regions", synth_opts.cfg.regions)->capture_default_str();
  synth_cmd->add_option("--noise", synth_opts.cfg.noise)->capture_default_str();
  synth_cmd->add_option("--ignore-border", synth_opts.cfg.ignore_border)->capture_default_str();
  synth_cmd->callback([&] { action = [&] { return synth(ctx, synth_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!action) return 1;
    return action();
  } catch (const Error& e) {
    std::cerr << "cueforge: " << e.what() << "\n";
    return e.is_io() ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "cueforge: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cueforge: " << e.what() << "\n";
    return 1;
  } catch (...) {
    std::cerr << "cueforge: unknown failure\n";
    return 1;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "cueforge: " << e.what() << "\n";
  } catch (...) {
    std::cerr << "cueforge: unknown failure\n";
  }
  return 1;
}

}  // namespace cueforge::cli
