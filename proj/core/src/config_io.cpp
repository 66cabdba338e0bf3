#include "tsccn/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "tsccn/error.hpp"

namespace tsccn {

namespace engine {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
    if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
    if (epochs < 1) throw InvalidArgument("epochs must be positive");
    if (image_size < 8) throw InvalidArgument("image_size must be at least 8");
    if (steps_per_epoch < 0) throw InvalidArgument("steps_per_epoch must be nonnegative");
    if (eval_every < 1) throw InvalidArgument("eval_every must be positive");
    if (stop_at_train_accuracy < 0.0 || stop_at_train_accuracy > 1.0)
        throw InvalidArgument("stop_at_train_accuracy must lie in [0, 1]");
    weights.validate();
    resolved_network().validate();
    if (net::flags_for(ablation).triplet && batch_size < 2)
        throw InvalidArgument("triplet mining needs batch_size >= 2");
}

net::NetworkConfig TrainConfig::resolved_network() const {
    net::NetworkConfig n = network;
    n.ablation = ablation;
    return n;
}

TrainConfig compact_train_config(net::Ablation ablation) {
    TrainConfig c;
    c.ablation = ablation;
    c.network = net::compact_config(ablation);
    c.image_size = 32;
    return c;
}

}  // namespace engine

namespace config {

namespace {

void require_object(const nlohmann::json& j, const char* what) {
    if (!j.is_object()) throw InvalidArgument(std::string(what) + ": expected a JSON object");
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const char* what) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw InvalidArgument(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const char* what) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string(what) + ": bad value for '" + key + "': " + e.what());
    }
}

nlohmann::json network_json(const net::NetworkConfig& c, bool with_ablation) {
    nlohmann::json j = {
        {"backbone",
         {{"in_channels", c.backbone.in_channels},
          {"base_width", c.backbone.base_width},
          {"blocks_per_stage", c.backbone.blocks_per_stage},
          {"stem_kernel", c.backbone.stem_kernel},
          {"stem_stride", c.backbone.stem_stride},
          {"stem_pool", c.backbone.stem_pool}}},
        {"branch_stages", c.branch_stages},
        {"tie_branches", c.tie_branches},
        {"discriminator_hidden", c.discriminator_hidden},
        {"gate_hidden", c.gate_hidden},
    };
    if (with_ablation) j["ablation"] = std::string(net::to_string(c.ablation));
    return j;
}

net::NetworkConfig network_parse(const nlohmann::json& j, bool with_ablation) {
    constexpr const char* what = "network config";
    require_object(j, what);
    std::set<std::string> keys = {"backbone", "branch_stages", "tie_branches", "discriminator_hidden", "gate_hidden"};
    if (with_ablation) keys.insert("ablation");
    reject_unknown(j, keys, what);
    net::NetworkConfig c;
    if (auto it = j.find("backbone"); it != j.end()) {
        require_object(*it, "backbone config");
        reject_unknown(*it, {"in_channels", "base_width", "blocks_per_stage", "stem_kernel", "stem_stride", "stem_pool"},
                       "backbone config");
        read(*it, "in_channels", c.backbone.in_channels, what);
        read(*it, "base_width", c.backbone.base_width, what);
        read(*it, "blocks_per_stage", c.backbone.blocks_per_stage, what);
        read(*it, "stem_kernel", c.backbone.stem_kernel, what);
        read(*it, "stem_stride", c.backbone.stem_stride, what);
        read(*it, "stem_pool", c.backbone.stem_pool, what);
    }
    read(j, "branch_stages", c.branch_stages, what);
    read(j, "tie_branches", c.tie_branches, what);
    read(j, "discriminator_hidden", c.discriminator_hidden, what);
    read(j, "gate_hidden", c.gate_hidden, what);
    if (with_ablation) {
        std::string name(net::to_string(c.ablation));
        read(j, "ablation", name, what);
        c.ablation = net::parse_ablation(name);
    }
    c.validate();
    return c;
}

}  // namespace

nlohmann::json to_json(const loss::LossWeights& w) {
    return {{"lambda1", w.lambda1},
            {"lambda2", w.lambda2},
            {"lambda3", w.lambda3},
            {"triplet_margin", w.triplet_margin},
            {"u_hat", w.u_hat},
            {"paper_literal_weight_loss", w.paper_literal_weight_loss}};
}

loss::LossWeights loss_weights_from_json(const nlohmann::json& j) {
    constexpr const char* what = "loss weights";
    require_object(j, what);
    reject_unknown(j, {"lambda1", "lambda2", "lambda3", "triplet_margin", "u_hat", "paper_literal_weight_loss"}, what);
    loss::LossWeights w;
    read(j, "lambda1", w.lambda1, what);
    read(j, "lambda2", w.lambda2, what);
    read(j, "lambda3", w.lambda3, what);
    read(j, "triplet_margin", w.triplet_margin, what);
    read(j, "u_hat", w.u_hat, what);
    read(j, "paper_literal_weight_loss", w.paper_literal_weight_loss, what);
    w.validate();
    return w;
}

nlohmann::json to_json(const net::NetworkConfig& c) { return network_json(c, true); }
net::NetworkConfig network_from_json(const nlohmann::json& j) { return network_parse(j, true); }

nlohmann::json to_json(const engine::TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"weights", to_json(c.weights)},
            {"ablation", std::string(net::to_string(c.ablation))},
            {"seed", c.seed},
            {"network", network_json(c.network, false)},
            {"image_size", c.image_size},
            {"augment", c.augment},
            {"oversample", c.oversample},
            {"steps_per_epoch", c.steps_per_epoch},
            {"stop_at_train_accuracy", c.stop_at_train_accuracy},
            {"eval_every", c.eval_every}};
}

engine::TrainConfig train_config_from_json(const nlohmann::json& j) {
    constexpr const char* what = "train config";
    require_object(j, what);
    reject_unknown(j,
                   {"learning_rate", "batch_size", "epochs", "weights", "ablation", "seed", "network", "image_size",
                    "augment", "oversample", "steps_per_epoch", "stop_at_train_accuracy", "eval_every"},
                   what);
    engine::TrainConfig c;
    read(j, "learning_rate", c.learning_rate, what);
    read(j, "batch_size", c.batch_size, what);
    read(j, "epochs", c.epochs, what);
    if (auto it = j.find("weights"); it != j.end()) c.weights = loss_weights_from_json(*it);
    std::string ablation(net::to_string(c.ablation));
    read(j, "ablation", ablation, what);
    c.ablation = net::parse_ablation(ablation);
    read(j, "seed", c.seed, what);
    if (auto it = j.find("network"); it != j.end()) c.network = network_parse(*it, false);
    c.network.ablation = c.ablation;
    read(j, "image_size", c.image_size, what);
    read(j, "augment", c.augment, what);
    read(j, "oversample", c.oversample, what);
    read(j, "steps_per_epoch", c.steps_per_epoch, what);
    read(j, "stop_at_train_accuracy", c.stop_at_train_accuracy, what);
    read(j, "eval_every", c.eval_every, what);
    c.validate();
    return c;
}

nlohmann::json to_json(const synth::SynthConfig& c) {
    return {{"n_patients", c.n_patients},
            {"slices_per_patient", c.slices_per_patient},
            {"vertebrae_per_slice", c.vertebrae_per_slice},
            {"class_ratio", c.class_ratio},
            {"noise_level", c.noise_level},
            {"seed", c.seed},
            {"patch_side", c.patch_side}};
}

synth::SynthConfig synth_config_from_json(const nlohmann::json& j) {
    constexpr const char* what = "synth config";
    require_object(j, what);
    reject_unknown(j,
                   {"n_patients", "slices_per_patient", "vertebrae_per_slice", "class_ratio", "noise_level", "seed",
                    "patch_side"},
                   what);
    synth::SynthConfig c;
    read(j, "n_patients", c.n_patients, what);
    read(j, "slices_per_patient", c.slices_per_patient, what);
    read(j, "vertebrae_per_slice", c.vertebrae_per_slice, what);
    read(j, "class_ratio", c.class_ratio, what);
    read(j, "noise_level", c.noise_level, what);
    read(j, "seed", c.seed, what);
    read(j, "patch_side", c.patch_side, what);
    c.validate();
    return c;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string config_hash(const nlohmann::json& j) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace config
}  // namespace tsccn
