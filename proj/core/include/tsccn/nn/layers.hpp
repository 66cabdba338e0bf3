#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tsccn/nn/ops.hpp"

namespace tsccn::nn {

enum class Mode { Train, Eval };

using Rng = std::mt19937_64;

// Visits learnable parameters and persistent buffers with dotted names,
// e.g. "classification.stage3.block0.conv1.weight".
struct ParameterVisitor {
    std::function<void(const std::string&, Var&)> on_parameter;
    std::function<void(const std::string&, Tensor&)> on_buffer;
};

class Module {
public:
    virtual ~Module() = default;
    virtual void visit(const std::string& prefix, ParameterVisitor& visitor) = 0;

    std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix = "");
    std::size_t parameter_count();
};

std::string join_name(const std::string& prefix, const std::string& name);

class Conv2d : public Module {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng);
    Var forward(const Var& x) const;
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

    Var weight;

private:
    Conv2dSpec spec_;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int channels);
    Var forward(const Var& x, Mode mode);
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

    Var gamma;
    Var beta;
    BatchNormState state;
};

class Linear : public Module {
public:
    Linear(int in_features, int out_features, Rng& rng, bool bias = true);
    Var forward(const Var& x) const;
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

    int in_features() const { return weight.dim(1); }
    int out_features() const { return weight.dim(0); }

    Var weight;
    Var bias;  // undefined when constructed without bias
};

// Linear -> ReLU -> Linear.
class Mlp : public Module {
public:
    Mlp(int in_features, int hidden, int out_features, Rng& rng);
    Var forward(const Var& x) const;
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

    Linear fc1;
    Linear fc2;
};

// Two 3x3 conv-BN layers with an identity or 1x1 projection shortcut.
class BasicBlock : public Module {
public:
    BasicBlock(int in_channels, int out_channels, int stride, Rng& rng);
    Var forward(const Var& x, Mode mode);
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

private:
    Conv2d conv1_;
    BatchNorm2d bn1_;
    Conv2d conv2_;
    BatchNorm2d bn2_;
    std::unique_ptr<Conv2d> proj_;
    std::unique_ptr<BatchNorm2d> proj_bn_;
};

// Residual backbone layout. Stage 0 is the stem; stages 1..4 are residual
// stages whose widths are base_width * {1, 2, 4, 8}. The defaults give the
// 18-layer ImageNet layout.
struct BackboneConfig {
    int in_channels = 1;
    int base_width = 64;
    int blocks_per_stage = 2;
    int stem_kernel = 7;
    int stem_stride = 2;
    bool stem_pool = true;

    static constexpr int kStages = 5;
    int stage_channels(int stage) const;  // output channels of a stage
    bool operator==(const BackboneConfig&) const = default;
};

// Contiguous run of backbone stages [first, last).
class ResNetSegment : public Module {
public:
    ResNetSegment(const BackboneConfig& cfg, int first_stage, int last_stage, Rng& rng);
    Var forward(const Var& x, Mode mode);
    void visit(const std::string& prefix, ParameterVisitor& visitor) override;

    int first_stage() const { return first_; }
    int last_stage() const { return last_; }
    int out_channels() const { return out_channels_; }

private:
    struct Stem {
        std::unique_ptr<Conv2d> conv;
        std::unique_ptr<BatchNorm2d> bn;
        bool pool = false;
    };

    BackboneConfig cfg_;
    int first_;
    int last_;
    int out_channels_;
    std::unique_ptr<Stem> stem_;
    std::vector<std::vector<std::unique_ptr<BasicBlock>>> stages_;
};

// Copies parameter values and buffers from `src` into `dst`; both modules
// must have identical structure.
void copy_parameters(Module& src, Module& dst);

}  // namespace tsccn::nn
