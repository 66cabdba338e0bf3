#include "tsccn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "tsccn/error.hpp"

namespace tsccn::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

struct Collected {
    std::string name;
    std::string kind;
    nn::Tensor* tensor;
};

std::vector<Collected> collect(nn::Module& model) {
    std::vector<Collected> out;
    nn::ParameterVisitor v;
    v.on_parameter = [&](const std::string& name, nn::Var& p) { out.push_back({name, "param", &p.mutable_value()}); };
    v.on_buffer = [&](const std::string& name, nn::Tensor& t) { out.push_back({name, "buffer", &t}); };
    model.visit("", v);
    return out;
}

struct Opened {
    std::ifstream in;
    Header header;
    std::streamoff payload_start = 0;
};

Opened open(const std::filesystem::path& path) {
    Opened o;
    o.in.open(path, std::ios::binary);
    if (!o.in) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    o.in.read(magic, 8);
    o.in.read(reinterpret_cast<char*>(&version), sizeof version);
    o.in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    if (!o.in || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError(path.string() + ": not a checkpoint file");
    if (version != kVersion)
        throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    if (header_len > (1ull << 30)) throw CheckpointError(path.string() + ": corrupt header length");
    std::string text(header_len, '\0');
    o.in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!o.in) throw CheckpointError(path.string() + ": truncated header");
    try {
        const auto j = nlohmann::json::parse(text);
        o.header.config = j.at("config");
        for (const auto& t : j.at("tensors"))
            o.header.tensors.push_back({t.at("name").get<std::string>(), t.at("kind").get<std::string>(),
                                        t.at("shape").get<std::vector<int>>(), t.at("offset").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": malformed header: " + e.what());
    }
    o.payload_start = o.in.tellg();
    return o;
}

}  // namespace

void save(const std::filesystem::path& path, nn::Module& model, const nlohmann::json& config) {
    const auto tensors = collect(model);
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        index.push_back({{"name", t.name}, {"kind", t.kind}, {"shape", t.tensor->shape()}, {"offset", offset}});
        offset += t.tensor->size();
    }
    const std::string header = nlohmann::json{{"config", config}, {"tensors", index}}.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    const std::uint64_t header_len = header.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& t : tensors)
        out.write(reinterpret_cast<const char*>(t.tensor->data()),
                  static_cast<std::streamsize>(t.tensor->size() * sizeof(float)));
    if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Header read_header(const std::filesystem::path& path) { return open(path).header; }

Header load_into(const std::filesystem::path& path, nn::Module& model) {
    Opened o = open(path);
    std::map<std::string, const TensorRecord*> by_name;
    for (const auto& r : o.header.tensors) by_name[r.name] = &r;
    const auto tensors = collect(model);
    if (tensors.size() != by_name.size())
        throw CheckpointError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                              std::to_string(tensors.size()));
    for (const auto& t : tensors) {
        auto it = by_name.find(t.name);
        if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor '" + t.name + "'");
        const TensorRecord& r = *it->second;
        if (r.shape != t.tensor->shape())
            throw CheckpointError("tensor '" + t.name + "' has shape " + nn::shape_string(r.shape) + ", model expects " +
                                  nn::shape_string(t.tensor->shape()));
        if (r.kind != t.kind) throw CheckpointError("tensor '" + t.name + "' kind mismatch");
        o.in.seekg(o.payload_start + static_cast<std::streamoff>(r.offset * sizeof(float)));
        o.in.read(reinterpret_cast<char*>(t.tensor->data()),
                  static_cast<std::streamsize>(t.tensor->size() * sizeof(float)));
        if (!o.in) throw CheckpointError("truncated payload for tensor '" + t.name + "'");
    }
    return o.header;
}

}  // namespace tsccn::ckpt
