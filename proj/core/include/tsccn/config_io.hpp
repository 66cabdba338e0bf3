#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "tsccn/synthgen.hpp"
#include "tsccn/train_config.hpp"

namespace tsccn::config {

// JSON mappings. Parsing starts from the defaults, overrides the keys that are
// present and rejects unknown keys with InvalidArgument.
nlohmann::json to_json(const loss::LossWeights& w);
loss::LossWeights loss_weights_from_json(const nlohmann::json& j);

nlohmann::json to_json(const net::NetworkConfig& c);
net::NetworkConfig network_from_json(const nlohmann::json& j);

nlohmann::json to_json(const engine::TrainConfig& c);
engine::TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const synth::SynthConfig& c);
synth::SynthConfig synth_config_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// FNV-1a 64 over the compact dump (object keys are sorted), as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace tsccn::config
