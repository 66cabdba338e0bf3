#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tsccn/nn/layers.hpp"

namespace tsccn::ckpt {

// File layout, version 1:
//   8 bytes   magic "TSCCNCK1"
//   u32 LE    format version
//   u64 LE    header length in bytes
//   header    UTF-8 JSON: {"config": ..., "tensors": [{"name", "kind", "shape", "offset"}]}
//   payload   float32 LE values, tensors back to back; offsets count floats from payload start
inline constexpr char kMagic[8] = {'T', 'S', 'C', 'C', 'N', 'C', 'K', '1'};
inline constexpr std::uint32_t kVersion = 1;

struct TensorRecord {
    std::string name;
    std::string kind;  // "param" or "buffer"
    std::vector<int> shape;
    std::uint64_t offset = 0;
};

struct Header {
    nlohmann::json config;
    std::vector<TensorRecord> tensors;
};

void save(const std::filesystem::path& path, nn::Module& model, const nlohmann::json& config);

Header read_header(const std::filesystem::path& path);

// Loads every tensor of `model` by name. Throws CheckpointError on missing,
// extra or mis-shaped tensors.
Header load_into(const std::filesystem::path& path, nn::Module& model);

}  // namespace tsccn::ckpt
