#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "tsccn/nn/layers.hpp"

namespace tsccn::net {

using nn::Mode;
using nn::Var;

enum class Ablation {
    SingleStream,
    SingleStreamTriplet,
    TwoStream,
    TwoStreamTriplet,
    PlusCompare,
    FullTsccn,
};

inline constexpr std::array<Ablation, 6> kAllAblations = {
    Ablation::SingleStream, Ablation::SingleStreamTriplet, Ablation::TwoStream,
    Ablation::TwoStreamTriplet, Ablation::PlusCompare, Ablation::FullTsccn,
};

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view name);  // throws InvalidArgument

// Which modules and loss terms an ablation switches on.
struct AblationFlags {
    bool recognition_stream = false;  // second backbone feeding the three-class head
    bool compare = false;             // three neighbor branches + discriminator
    bool triplet = false;
    bool gate = false;                // weight-control module + weight loss
};

AblationFlags flags_for(Ablation a);

struct NetworkConfig {
    nn::BackboneConfig backbone;
    int branch_stages = 3;  // stem + residual stages 1 and 2 per branch; the trunk takes the rest
    bool tie_branches = false;
    int discriminator_hidden = 128;
    int gate_hidden = 128;
    Ablation ablation = Ablation::FullTsccn;

    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// Small preset used by the tests and the synthetic benchmarks: 32x32 inputs,
// width 8, one block per stage, 3x3 stride-2 stem without pooling.
NetworkConfig compact_config(Ablation ablation = Ablation::FullTsccn);

struct RecognitionOutputs {
    Var f_R;       // (N, C_trunk)
    Var h_p, h_c, h_n;
    Var fused;     // h_p + h_c + h_n
    Var feature_map;  // trunk output before pooling
};

struct ClassificationOutputs {
    Var f_C;       // (N, C)
    Var logits2;   // (N, 2)
    Var embedding; // L2-normalized f_C
    Var feature_map;
};

struct GateOutputs {
    Var w;    // (N, 2): columns w_R, w_C
    Var w_R;  // (N, 1)
    Var w_C;  // (N, 1)
    Var u;    // (N, 1)
};

struct ModelOutputs {
    Var logits3;
    Var logits2;
    Var disc_prev;  // undefined without the compare network
    Var disc_next;
    Var embedding;
    GateOutputs gate;  // undefined members without the gate
    Var f_R;           // undefined for single-stream ablations
    Var f_C;
    Var cam_features;  // last feature map feeding the three-class head's leading stream
};

class TsccnModel : public nn::Module {
public:
    TsccnModel(const NetworkConfig& cfg, std::uint64_t seed);

    const NetworkConfig& config() const { return cfg_; }
    const AblationFlags& flags() const { return flags_; }

    // Images are (N, 1, S, S). Without the compare network the recognition
    // stream sees x_c alone and x_p, x_n are ignored.
    RecognitionOutputs recognition_forward(const Var& x_p, const Var& x_c, const Var& x_n, Mode mode);
    Var discriminate(const Var& h_a, const Var& h_b) const;
    ClassificationOutputs classification_forward(const Var& x_c, Mode mode);
    GateOutputs gate(const Var& f_R, const Var& f_C) const;
    Var fuse_and_classify(const Var& f_R, const Var& f_C, const Var& w_R, const Var& w_C) const;
    ModelOutputs forward(const Var& x_p, const Var& x_c, const Var& x_n, Mode mode);

    void visit(const std::string& prefix, nn::ParameterVisitor& visitor) override;

    int recognition_dim() const;
    int classification_dim() const;

    // Direct access for wiring tests.
    nn::ResNetSegment* branch(int i);  // 0 = prev, 1 = current, 2 = next
    nn::ResNetSegment* trunk() { return trunk_.get(); }
    nn::Mlp* gate_mlp() { return gate_.get(); }
    nn::Linear& three_class_head() { return *head3_; }

private:
    NetworkConfig cfg_;
    AblationFlags flags_;
    std::array<std::unique_ptr<nn::ResNetSegment>, 3> branches_;  // only [0] when tied
    std::unique_ptr<nn::ResNetSegment> trunk_;
    std::unique_ptr<nn::ResNetSegment> recognition_backbone_;  // two-stream without compare
    std::unique_ptr<nn::ResNetSegment> classification_backbone_;
    std::unique_ptr<nn::Linear> head2_;
    std::unique_ptr<nn::Linear> head3_;
    std::unique_ptr<nn::Mlp> discriminator_;
    std::unique_ptr<nn::Mlp> gate_;
};

}  // namespace tsccn::net
