#include "tsccn/nn/layers.hpp"

#include <cmath>

#include "tsccn/error.hpp"

namespace tsccn::nn {

std::string join_name(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

std::vector<std::pair<std::string, Var>> Module::named_parameters(const std::string& prefix) {
    std::vector<std::pair<std::string, Var>> out;
    ParameterVisitor v;
    v.on_parameter = [&](const std::string& name, Var& p) { out.emplace_back(name, p); };
    v.on_buffer = [](const std::string&, Tensor&) {};
    visit(prefix, v);
    return out;
}

std::size_t Module::parameter_count() {
    std::size_t n = 0;
    for (auto& [name, p] : named_parameters()) n += p.value().size();
    return n;
}

namespace {

Var kaiming_conv(int cout, int cin, int k, Rng& rng) {
    Tensor w({cout, cin, k, k});
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(cout * k * k)));
    for (float& v : w.values()) v = dist(rng);
    return Var(std::move(w), true);
}

Var uniform_param(Shape shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (float& v : t.values()) v = dist(rng);
    return Var(std::move(t), true);
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng)
    : weight(kaiming_conv(out_channels, in_channels, kernel, rng)), spec_{stride, padding} {}

Var Conv2d::forward(const Var& x) const { return conv2d(x, weight, spec_); }

void Conv2d::visit(const std::string& prefix, ParameterVisitor& visitor) {
    visitor.on_parameter(join_name(prefix, "weight"), weight);
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma(Tensor({channels}, 1.0f), true), beta(Tensor({channels}, 0.0f), true) {
    state.running_mean = Tensor({channels}, 0.0f);
    state.running_var = Tensor({channels}, 1.0f);
}

Var BatchNorm2d::forward(const Var& x, Mode mode) {
    return batch_norm2d(x, gamma, beta, state, mode == Mode::Train);
}

void BatchNorm2d::visit(const std::string& prefix, ParameterVisitor& visitor) {
    visitor.on_parameter(join_name(prefix, "gamma"), gamma);
    visitor.on_parameter(join_name(prefix, "beta"), beta);
    visitor.on_buffer(join_name(prefix, "running_mean"), state.running_mean);
    visitor.on_buffer(join_name(prefix, "running_var"), state.running_var);
}

Linear::Linear(int in_features, int out_features, Rng& rng, bool bias)
    : weight(uniform_param({out_features, in_features}, in_features, rng)) {
    if (bias) this->bias = uniform_param({out_features}, in_features, rng);
}

Var Linear::forward(const Var& x) const { return linear(x, weight, bias); }

void Linear::visit(const std::string& prefix, ParameterVisitor& visitor) {
    visitor.on_parameter(join_name(prefix, "weight"), weight);
    if (bias.defined()) visitor.on_parameter(join_name(prefix, "bias"), bias);
}

Mlp::Mlp(int in_features, int hidden, int out_features, Rng& rng)
    : fc1(in_features, hidden, rng), fc2(hidden, out_features, rng) {}

Var Mlp::forward(const Var& x) const { return fc2.forward(relu(fc1.forward(x))); }

void Mlp::visit(const std::string& prefix, ParameterVisitor& visitor) {
    fc1.visit(join_name(prefix, "fc1"), visitor);
    fc2.visit(join_name(prefix, "fc2"), visitor);
}

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride, Rng& rng)
    : conv1_(in_channels, out_channels, 3, stride, 1, rng),
      bn1_(out_channels),
      conv2_(out_channels, out_channels, 3, 1, 1, rng),
      bn2_(out_channels) {
    if (stride != 1 || in_channels != out_channels) {
        proj_ = std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, rng);
        proj_bn_ = std::make_unique<BatchNorm2d>(out_channels);
    }
}

Var BasicBlock::forward(const Var& x, Mode mode) {
    Var y = relu(bn1_.forward(conv1_.forward(x), mode));
    y = bn2_.forward(conv2_.forward(y), mode);
    Var shortcut = proj_ ? proj_bn_->forward(proj_->forward(x), mode) : x;
    return relu(add(y, shortcut));
}

void BasicBlock::visit(const std::string& prefix, ParameterVisitor& visitor) {
    conv1_.visit(join_name(prefix, "conv1"), visitor);
    bn1_.visit(join_name(prefix, "bn1"), visitor);
    conv2_.visit(join_name(prefix, "conv2"), visitor);
    bn2_.visit(join_name(prefix, "bn2"), visitor);
    if (proj_) {
        proj_->visit(join_name(prefix, "proj"), visitor);
        proj_bn_->visit(join_name(prefix, "proj_bn"), visitor);
    }
}

int BackboneConfig::stage_channels(int stage) const {
    if (stage < 0 || stage >= kStages) throw InvalidArgument("backbone stage out of range");
    if (stage == 0) return base_width;
    return base_width << (stage - 1);
}

ResNetSegment::ResNetSegment(const BackboneConfig& cfg, int first_stage, int last_stage, Rng& rng)
    : cfg_(cfg), first_(first_stage), last_(last_stage) {
    if (first_stage < 0 || last_stage > BackboneConfig::kStages || first_stage >= last_stage)
        throw InvalidArgument("invalid backbone stage range [" + std::to_string(first_stage) + ", " +
                              std::to_string(last_stage) + ")");
    if (cfg.base_width < 1 || cfg.blocks_per_stage < 1 || cfg.stem_kernel < 1 || cfg.stem_stride < 1)
        throw InvalidArgument("invalid backbone configuration");
    for (int s = first_stage; s < last_stage; ++s) {
        if (s == 0) {
            stem_ = std::make_unique<Stem>();
            stem_->conv = std::make_unique<Conv2d>(cfg.in_channels, cfg.base_width, cfg.stem_kernel, cfg.stem_stride,
                                                   cfg.stem_kernel / 2, rng);
            stem_->bn = std::make_unique<BatchNorm2d>(cfg.base_width);
            stem_->pool = cfg.stem_pool;
            continue;
        }
        std::vector<std::unique_ptr<BasicBlock>> blocks;
        const int in_ch = cfg.stage_channels(s - 1);
        const int out_ch = cfg.stage_channels(s);
        const int stride = s == 1 ? 1 : 2;
        for (int b = 0; b < cfg.blocks_per_stage; ++b)
            blocks.push_back(std::make_unique<BasicBlock>(b == 0 ? in_ch : out_ch, out_ch, b == 0 ? stride : 1, rng));
        stages_.push_back(std::move(blocks));
    }
    out_channels_ = cfg.stage_channels(last_stage - 1);
}

Var ResNetSegment::forward(const Var& x, Mode mode) {
    Var y = x;
    if (stem_) {
        y = relu(stem_->bn->forward(stem_->conv->forward(y), mode));
        if (stem_->pool) y = max_pool2d(y, 3, 2, 1);
    }
    for (auto& stage : stages_)
        for (auto& block : stage) y = block->forward(y, mode);
    return y;
}

void ResNetSegment::visit(const std::string& prefix, ParameterVisitor& visitor) {
    if (stem_) {
        stem_->conv->visit(join_name(prefix, "stem.conv"), visitor);
        stem_->bn->visit(join_name(prefix, "stem.bn"), visitor);
    }
    const int first_residual = std::max(first_, 1);
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const std::string stage_name = join_name(prefix, "stage" + std::to_string(first_residual + static_cast<int>(i)));
        for (std::size_t b = 0; b < stages_[i].size(); ++b)
            stages_[i][b]->visit(join_name(stage_name, "block" + std::to_string(b)), visitor);
    }
}

void copy_parameters(Module& src, Module& dst) {
    std::vector<Tensor*> src_tensors;
    ParameterVisitor collect;
    collect.on_parameter = [&](const std::string&, Var& p) { src_tensors.push_back(&p.mutable_value()); };
    collect.on_buffer = [&](const std::string&, Tensor& t) { src_tensors.push_back(&t); };
    src.visit("", collect);

    std::size_t i = 0;
    auto assign = [&](Tensor& t) {
        if (i >= src_tensors.size() || src_tensors[i]->shape() != t.shape())
            throw ShapeMismatch("copy_parameters: modules differ in structure");
        t = *src_tensors[i++];
    };
    ParameterVisitor write;
    write.on_parameter = [&](const std::string&, Var& p) { assign(p.mutable_value()); };
    write.on_buffer = [&](const std::string&, Tensor& t) { assign(t); };
    dst.visit("", write);
    if (i != src_tensors.size()) throw ShapeMismatch("copy_parameters: modules differ in structure");
}

}  // namespace tsccn::nn
