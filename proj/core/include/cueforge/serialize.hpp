#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cueforge/experts.hpp"
#include "cueforge/mlp.hpp"

namespace cueforge {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws SchemaError on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Little-endian float64 bytes, independent of the host byte order.
std::vector<std::uint8_t> pack_f64(std::span<const double> values);
std::vector<double> unpack_f64(std::span<const std::uint8_t> bytes);

/// Models are JSON documents whose tensors carry a shape, a "<f8" dtype tag
/// and base64 data.
std::string model_to_json(const MlpModel& m);
MlpModel model_from_json(const std::string& text);
std::string fusion_to_json(const FusionModel& f);
FusionModel fusion_from_json(const std::string& text);

void save_model(const MlpModel& m, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);
void save_fusion(const FusionModel& f, const std::filesystem::path& path);
FusionModel load_fusion(const std::filesystem::path& path);

/// Softmax fields go to disk as a PFM plane stack, one plane per class.
void write_softmax_field(const SoftmaxField& field, const std::filesystem::path& path);
SoftmaxField read_softmax_field(const std::filesystem::path& path, int k);

/// Writes `text` to `path`, creating parent directories; throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Throws MissingFile when absent, IoError when unreadable.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cueforge
