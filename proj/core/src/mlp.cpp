#include "cueforge/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cueforge/error.hpp"

namespace cueforge {

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw Error(ErrorKind::BadSpec, "an MLP needs at least input and output widths");
  for (int w : layer_widths)
    if (w <= 0) throw Error(ErrorKind::BadSpec, "layer widths must be positive, got " + describe());
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
    throw Error(ErrorKind::BadSpec, "init scale must be finite and >= 0");
}

void MlpSpec::validate_color_expert() const {
  validate();
  if (input_dim() < 1 || input_dim() > 3)
    throw Error(ErrorKind::BadSpec, "color expert input must have 1 to 3 channels, got " + describe());
  const int hidden = layer_count() - 1;
  if (hidden < 1 || hidden > 2)
    throw Error(ErrorKind::BadSpec, "color expert needs 1 or 2 hidden layers, got " + describe());
}

MlpSpec MlpSpec::parse(const std::string& widths, double init_scale) {
  MlpSpec spec;
  spec.init_scale = init_scale;
  std::stringstream in(widths);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      const int w = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      spec.layer_widths.push_back(w);
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadSpec, "cannot parse layer width '" + part + "' in '" + widths + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string MlpSpec::describe() const {
  std::string out;
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(layer_widths[i]);
  }
  return out;
}

std::size_t parameter_count(const MlpSpec& spec) {
  std::size_t n = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    n += static_cast<std::size_t>(spec.layer_widths[l] + 1) * spec.layer_widths[l + 1];
  }
  return n;
}

std::size_t MlpModel::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<std::size_t>(spec.layer_widths[l] + 1) * spec.layer_widths[l + 1];
  return off;
}

std::size_t MlpModel::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(spec.layer_widths[layer]) * spec.layer_widths[layer + 1];
}

std::span<const double> MlpModel::weights(int layer) const {
  return {params.data() + weight_offset(layer),
          static_cast<std::size_t>(spec.layer_widths[layer]) * spec.layer_widths[layer + 1]};
}
std::span<const double> MlpModel::bias(int layer) const {
  return {params.data() + bias_offset(layer), static_cast<std::size_t>(spec.layer_widths[layer + 1])};
}
std::span<double> MlpModel::weights(int layer) {
  return {params.data() + weight_offset(layer),
          static_cast<std::size_t>(spec.layer_widths[layer]) * spec.layer_widths[layer + 1]};
}
std::span<double> MlpModel::bias(int layer) {
  return {params.data() + bias_offset(layer), static_cast<std::size_t>(spec.layer_widths[layer + 1])};
}

MlpModel init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpModel m{spec, std::vector<double>(parameter_count(spec), 0.0)};
  if (spec.init_scale > 0.0)
    for (double& p : m.params) p = rng.uniform(-spec.init_scale, spec.init_scale);
  return m;
}

namespace {

void check_params(const MlpModel& m) {
  if (m.params.size() != parameter_count(m.spec))
    throw Error(ErrorKind::DimMismatch, "model holds " + std::to_string(m.params.size()) +
                                            " parameters, spec " + m.spec.describe() + " needs " +
                                            std::to_string(parameter_count(m.spec)));
}

}  // namespace

ForwardTrace forward_trace(const MlpModel& m, std::span<const double> features, std::size_t rows) {
  check_params(m);
  const int in0 = m.spec.input_dim();
  if (features.size() != rows * static_cast<std::size_t>(in0))
    throw Error(ErrorKind::DimMismatch, "feature buffer of " + std::to_string(features.size()) +
                                            " values does not hold " + std::to_string(rows) + " rows of dim " +
                                            std::to_string(in0));
  ForwardTrace t;
  t.rows = rows;
  t.acts.reserve(static_cast<std::size_t>(m.spec.layer_count()) + 1);
  t.acts.emplace_back(features.begin(), features.end());
  for (int l = 0; l < m.spec.layer_count(); ++l) {
    const int in = m.spec.layer_widths[l], out = m.spec.layer_widths[l + 1];
    const bool hidden = l + 1 < m.spec.layer_count();
    const auto w = m.weights(l);
    const auto b = m.bias(l);
    const std::vector<double>& x = t.acts.back();
    std::vector<double> y(rows * static_cast<std::size_t>(out));
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * in;
      double* yr = y.data() + r * out;
      for (int o = 0; o < out; ++o) {
        const double* wo = w.data() + static_cast<std::size_t>(o) * in;
        double z = b[o];
        for (int i = 0; i < in; ++i) z += wo[i] * xr[i];
        yr[o] = hidden ? std::max(z, 0.0) : z;
      }
    }
    t.acts.push_back(std::move(y));
  }
  return t;
}

void softmax_rows(std::span<double> values, std::size_t rows, int k) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* v = values.data() + r * k;
    const double mx = *std::max_element(v, v + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      v[j] = std::exp(v[j] - mx);
      sum += v[j];
    }
    for (int j = 0; j < k; ++j) v[j] /= sum;
  }
}

ForwardResult forward(const MlpModel& m, std::span<const double> features, std::size_t rows) {
  ForwardTrace t = forward_trace(m, features, rows);
  ForwardResult r;
  r.rows = rows;
  r.k = m.spec.output_dim();
  r.logits = std::move(t.acts.back());
  r.probs = r.logits;
  softmax_rows(r.probs, rows, r.k);
  return r;
}

std::vector<double> backward(const MlpModel& m, const ForwardTrace& trace, std::span<const double> dlogits) {
  const std::size_t rows = trace.rows;
  if (dlogits.size() != rows * static_cast<std::size_t>(m.spec.output_dim()))
    throw Error(ErrorKind::DimMismatch, "output gradient has the wrong size");
  std::vector<double> grad(m.params.size(), 0.0);
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (int l = m.spec.layer_count() - 1; l >= 0; --l) {
    const int in = m.spec.layer_widths[l], out = m.spec.layer_widths[l + 1];
    const std::vector<double>& x = trace.acts[l];
    const auto w = m.weights(l);
    double* gw = grad.data() + m.weight_offset(l);
    double* gb = grad.data() + m.bias_offset(l);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * in;
      const double* dr = delta.data() + r * out;
      for (int o = 0; o < out; ++o) {
        if (dr[o] == 0.0) continue;
        gb[o] += dr[o];
        double* gwo = gw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) gwo[i] += dr[o] * xr[i];
      }
    }
    if (l == 0) break;
    // Propagate to the previous layer's ReLU output; ReLU passes where it was active.
    std::vector<double> prev(rows * static_cast<std::size_t>(in), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * in;
      const double* dr = delta.data() + r * out;
      double* pr = prev.data() + r * in;
      for (int o = 0; o < out; ++o) {
        if (dr[o] == 0.0) continue;
        const double* wo = w.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) pr[i] += dr[o] * wo[i];
      }
      for (int i = 0; i < in; ++i)
        if (xr[i] <= 0.0) pr[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return grad;
}

LossGrad loss_and_grad(const MlpModel& m, std::span<const double> features, std::span<const Label> labels) {
  const std::size_t rows = labels.size();
  const int k = m.spec.output_dim();
  if (rows == 0) throw Error(ErrorKind::DimMismatch, "empty batch");
  ForwardTrace t = forward_trace(m, features, rows);
  std::vector<double> probs(t.logits().begin(), t.logits().end());
  softmax_rows(probs, rows, k);
  LossGrad out;
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= k)
      throw Error(ErrorKind::DimMismatch, "label " + std::to_string(labels[r]) + " outside " + std::to_string(k) + " classes");
    // log-softmax from the logits keeps the loss finite for confident rows.
    const double* z = t.logits().data() + r * k;
    const double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    out.loss += (mx + std::log(sum) - z[labels[r]]) * inv;
    double* p = probs.data() + r * k;
    p[labels[r]] -= 1.0;
    for (int j = 0; j < k; ++j) p[j] *= inv;
  }
  out.grad = backward(m, t, probs);
  return out;
}

void adam_step(std::span<double> params, AdamState& state, std::span<const double> grad, double learning_rate,
               const AdamConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw Error(ErrorKind::DimMismatch, "optimizer state does not match the parameter count");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::Const ? "const" : "poly"; }

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "const") return LrSchedule::Const;
  if (text == "poly") return LrSchedule::Poly;
  throw Error(ErrorKind::InvalidParameter, "unknown learning rate schedule '" + text + "' (const|poly)");
}

double scheduled_lr(double base, LrSchedule schedule, int epoch, int epochs, double power) {
  if (schedule == LrSchedule::Const || epochs <= 0) return base;
  return base * std::pow(1.0 - static_cast<double>(epoch) / static_cast<double>(epochs), power);
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(values.size()); ++j)
    if (values[j] > values[best]) best = j;
  return best;
}

}  // namespace cueforge
