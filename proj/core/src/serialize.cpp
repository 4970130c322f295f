#include "cueforge/serialize.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "cueforge/error.hpp"
#include "cueforge/image_io.hpp"

namespace cueforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t{bytes[i]} << 16;
    if (rest == 2) v |= std::uint32_t{bytes[i + 1]} << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;
  if (text.size() % 4 != 0) throw Error(ErrorKind::SchemaError, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && i + 4 == text.size() && j >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lookup[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw Error(ErrorKind::SchemaError, "invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> pack_f64(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 8);
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

std::vector<double> unpack_f64(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw Error(ErrorKind::SchemaError, "float64 payload is not a multiple of 8 bytes");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[i * 8 + b]} << (8 * b);
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  return out;
}

namespace {

json tensor(std::vector<int> shape, std::span<const double> values) {
  return {{"shape", shape}, {"dtype", "<f8"}, {"data", base64_encode(pack_f64(values))}};
}

std::vector<double> read_tensor(const json& t, const std::vector<int>& shape) {
  if (t.at("dtype").get<std::string>() != "<f8") throw Error(ErrorKind::SchemaError, "tensor dtype must be <f8");
  if (t.at("shape").get<std::vector<int>>() != shape) throw Error(ErrorKind::SchemaError, "tensor shape mismatch");
  std::vector<double> v = unpack_f64(base64_decode(t.at("data").get<std::string>()));
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  if (v.size() != n) throw Error(ErrorKind::SchemaError, "tensor payload does not match its shape");
  return v;
}

json model_json(const MlpModel& m) {
  json layers = json::array();
  for (int l = 0; l < m.spec.layer_count(); ++l) {
    const int in = m.spec.layer_widths[l], out = m.spec.layer_widths[l + 1];
    layers.push_back({{"weight", tensor({out, in}, m.weights(l))}, {"bias", tensor({out}, m.bias(l))}});
  }
  return {{"format", "cueforge-mlp"},
          {"version", 1},
          {"layer_widths", m.spec.layer_widths},
          {"activation", "relu"},
          {"init_scale", m.spec.init_scale},
          {"layers", layers}};
}

MlpModel model_from(const json& j) {
  if (j.at("format").get<std::string>() != "cueforge-mlp") throw Error(ErrorKind::SchemaError, "not an MLP model file");
  if (j.at("activation").get<std::string>() != "relu") throw Error(ErrorKind::SchemaError, "unsupported activation");
  MlpModel m;
  m.spec.layer_widths = j.at("layer_widths").get<std::vector<int>>();
  m.spec.init_scale = j.at("init_scale").get<double>();
  m.spec.validate();
  m.params.assign(parameter_count(m.spec), 0.0);
  const json& layers = j.at("layers");
  if (!layers.is_array() || static_cast<int>(layers.size()) != m.spec.layer_count())
    throw Error(ErrorKind::SchemaError, "layer count does not match layer_widths");
  for (int l = 0; l < m.spec.layer_count(); ++l) {
    const int in = m.spec.layer_widths[l], out = m.spec.layer_widths[l + 1];
    const auto w = read_tensor(layers[l].at("weight"), {out, in});
    const auto b = read_tensor(layers[l].at("bias"), {out});
    std::copy(w.begin(), w.end(), m.weights(l).begin());
    std::copy(b.begin(), b.end(), m.bias(l).begin());
  }
  return m;
}

template <typename Fn>
auto parse_or_schema(const std::string& text, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
}

}  // namespace

std::string model_to_json(const MlpModel& m) { return model_json(m).dump(2) + "\n"; }

MlpModel model_from_json(const std::string& text) {
  return parse_or_schema(text, [](const json& j) { return model_from(j); });
}

std::string fusion_to_json(const FusionModel& f) {
  json j = {{"format", "cueforge-fusion"}, {"version", 1}, {"classes", f.k}, {"window", f.window},
            {"gate", model_json(f.gate)}};
  return j.dump(2) + "\n";
}

FusionModel fusion_from_json(const std::string& text) {
  return parse_or_schema(text, [](const json& j) {
    if (j.at("format").get<std::string>() != "cueforge-fusion") throw Error(ErrorKind::SchemaError, "not a fusion model file");
    FusionModel f{model_from(j.at("gate")), j.at("classes").get<int>(), j.at("window").get<int>()};
    if (f.gate.spec.input_dim() != f.window * f.window * 2 * f.k || f.gate.spec.output_dim() != 1)
      throw Error(ErrorKind::SchemaError, "gate shape does not match classes and window");
    return f;
  });
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_model(const MlpModel& m, const fs::path& path) { write_text_file(path, model_to_json(m)); }
MlpModel load_model(const fs::path& path) { return model_from_json(read_text_file(path)); }
void save_fusion(const FusionModel& f, const fs::path& path) { write_text_file(path, fusion_to_json(f)); }
FusionModel load_fusion(const fs::path& path) { return fusion_from_json(read_text_file(path)); }

void write_softmax_field(const SoftmaxField& field, const fs::path& path) {
  PlaneStack stack{field.height, field.width, field.k, std::vector<float>(field.probs.size())};
  const std::size_t n = field.pixel_count();
  for (std::size_t p = 0; p < n; ++p)
    for (int c = 0; c < field.k; ++c) stack.data[c * n + p] = static_cast<float>(field.probs[p * field.k + c]);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_pfm_stack(stack, path);
}

SoftmaxField read_softmax_field(const fs::path& path, int k) {
  const PlaneStack stack = read_pfm_stack(path, k);
  SoftmaxField field(stack.height, stack.width, k);
  const std::size_t n = field.pixel_count();
  for (std::size_t p = 0; p < n; ++p)
    for (int c = 0; c < k; ++c) field.probs[p * k + c] = stack.data[c * n + p];
  return field;
}

}  // namespace cueforge
