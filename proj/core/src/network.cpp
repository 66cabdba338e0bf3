#include "tsccn/network.hpp"

#include "tsccn/error.hpp"

namespace tsccn::net {

namespace {

// Keeps gate weights off 0 and 1 so the ratio u stays finite for any input.
constexpr float kGateEpsilon = 1e-6f;

constexpr std::array<std::string_view, 6> kAblationNames = {
    "single_stream", "single_stream_triplet", "two_stream", "two_stream_triplet", "plus_compare", "full_tsccn",
};

void check_same_shape(const Var& a, const Var& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeMismatch(std::string(what) + ": " + nn::shape_string(a.shape()) + " vs " +
                            nn::shape_string(b.shape()));
}

}  // namespace

std::string_view to_string(Ablation a) { return kAblationNames[static_cast<std::size_t>(a)]; }

Ablation parse_ablation(std::string_view name) {
    for (std::size_t i = 0; i < kAblationNames.size(); ++i)
        if (kAblationNames[i] == name) return static_cast<Ablation>(i);
    throw InvalidArgument("unknown ablation '" + std::string(name) + "'");
}

AblationFlags flags_for(Ablation a) {
    switch (a) {
        case Ablation::SingleStream: return {false, false, false, false};
        case Ablation::SingleStreamTriplet: return {false, false, true, false};
        case Ablation::TwoStream: return {true, false, false, false};
        case Ablation::TwoStreamTriplet: return {true, false, true, false};
        case Ablation::PlusCompare: return {true, true, true, false};
        case Ablation::FullTsccn: return {true, true, true, true};
    }
    throw InvalidArgument("invalid ablation value");
}

void NetworkConfig::validate() const {
    if (backbone.in_channels < 1 || backbone.base_width < 1 || backbone.blocks_per_stage < 1)
        throw InvalidArgument("backbone widths and depths must be positive");
    if (backbone.stem_kernel < 1 || backbone.stem_stride < 1) throw InvalidArgument("invalid stem geometry");
    if (branch_stages < 1 || branch_stages >= nn::BackboneConfig::kStages)
        throw InvalidArgument("branch_stages must lie in [1, " + std::to_string(nn::BackboneConfig::kStages - 1) + "]");
    if (discriminator_hidden < 1 || gate_hidden < 1) throw InvalidArgument("head widths must be positive");
}

NetworkConfig compact_config(Ablation ablation) {
    NetworkConfig cfg;
    cfg.backbone.base_width = 8;
    cfg.backbone.blocks_per_stage = 1;
    cfg.backbone.stem_kernel = 3;
    cfg.backbone.stem_stride = 2;
    cfg.backbone.stem_pool = false;
    cfg.discriminator_hidden = 32;
    cfg.gate_hidden = 32;
    cfg.ablation = ablation;
    return cfg;
}

TsccnModel::TsccnModel(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg), flags_(flags_for(cfg.ablation)) {
    cfg_.validate();
    nn::Rng rng(seed);
    constexpr int kLast = nn::BackboneConfig::kStages;
    const auto& bb = cfg_.backbone;
    if (flags_.compare) {
        const int n_branches = cfg_.tie_branches ? 1 : 3;
        for (int i = 0; i < n_branches; ++i)
            branches_[static_cast<std::size_t>(i)] = std::make_unique<nn::ResNetSegment>(bb, 0, cfg_.branch_stages, rng);
        trunk_ = std::make_unique<nn::ResNetSegment>(bb, cfg_.branch_stages, kLast, rng);
    } else if (flags_.recognition_stream) {
        recognition_backbone_ = std::make_unique<nn::ResNetSegment>(bb, 0, kLast, rng);
    }
    classification_backbone_ = std::make_unique<nn::ResNetSegment>(bb, 0, kLast, rng);
    const int c_dim = classification_backbone_->out_channels();
    head2_ = std::make_unique<nn::Linear>(c_dim, 2, rng);
    head3_ = std::make_unique<nn::Linear>(recognition_dim() + c_dim, 3, rng);
    if (flags_.compare) {
        const int h_channels = bb.stage_channels(cfg_.branch_stages - 1);
        discriminator_ = std::make_unique<nn::Mlp>(2 * h_channels, cfg_.discriminator_hidden, 2, rng);
    }
    if (flags_.gate) gate_ = std::make_unique<nn::Mlp>(recognition_dim() + c_dim, cfg_.gate_hidden, 2, rng);
}

int TsccnModel::recognition_dim() const {
    if (trunk_) return trunk_->out_channels();
    if (recognition_backbone_) return recognition_backbone_->out_channels();
    return 0;
}

int TsccnModel::classification_dim() const { return classification_backbone_->out_channels(); }

nn::ResNetSegment* TsccnModel::branch(int i) {
    if (i < 0 || i > 2) throw InvalidArgument("branch index must be 0, 1 or 2");
    if (cfg_.tie_branches) return branches_[0].get();
    return branches_[static_cast<std::size_t>(i)].get();
}

RecognitionOutputs TsccnModel::recognition_forward(const Var& x_p, const Var& x_c, const Var& x_n, Mode mode) {
    RecognitionOutputs out;
    if (!flags_.recognition_stream) throw InvalidArgument("recognition stream disabled by ablation " +
                                                          std::string(to_string(cfg_.ablation)));
    if (!flags_.compare) {
        out.feature_map = recognition_backbone_->forward(x_c, mode);
        out.f_R = nn::global_avg_pool(out.feature_map);
        return out;
    }
    check_same_shape(x_p, x_c, "recognition_forward inputs");
    check_same_shape(x_n, x_c, "recognition_forward inputs");
    out.h_p = branch(0)->forward(x_p, mode);
    out.h_c = branch(1)->forward(x_c, mode);
    out.h_n = branch(2)->forward(x_n, mode);
    check_same_shape(out.h_p, out.h_c, "branch outputs");
    check_same_shape(out.h_n, out.h_c, "branch outputs");
    out.fused = nn::add(nn::add(out.h_p, out.h_c), out.h_n);
    out.feature_map = trunk_->forward(out.fused, mode);
    out.f_R = nn::global_avg_pool(out.feature_map);
    return out;
}

Var TsccnModel::discriminate(const Var& h_a, const Var& h_b) const {
    if (!discriminator_) throw InvalidArgument("discriminator disabled by ablation");
    check_same_shape(h_a, h_b, "discriminate");
    return discriminator_->forward(nn::global_avg_pool(nn::concat({h_a, h_b})));
}

ClassificationOutputs TsccnModel::classification_forward(const Var& x_c, Mode mode) {
    ClassificationOutputs out;
    out.feature_map = classification_backbone_->forward(x_c, mode);
    out.f_C = nn::global_avg_pool(out.feature_map);
    out.logits2 = head2_->forward(out.f_C);
    out.embedding = nn::l2_normalize_rows(out.f_C);
    return out;
}

GateOutputs TsccnModel::gate(const Var& f_R, const Var& f_C) const {
    if (!gate_) throw InvalidArgument("gate disabled by ablation");
    GateOutputs g;
    g.w = nn::bounded_sigmoid(gate_->forward(nn::concat({f_R, f_C})), kGateEpsilon);
    g.w_R = nn::column(g.w, 0);
    g.w_C = nn::column(g.w, 1);
    g.u = nn::divide(g.w_R, g.w_C);
    return g;
}

Var TsccnModel::fuse_and_classify(const Var& f_R, const Var& f_C, const Var& w_R, const Var& w_C) const {
    return head3_->forward(nn::concat({nn::scale_rows(f_R, w_R), nn::scale_rows(f_C, w_C)}));
}

ModelOutputs TsccnModel::forward(const Var& x_p, const Var& x_c, const Var& x_n, Mode mode) {
    ModelOutputs out;
    ClassificationOutputs cls = classification_forward(x_c, mode);
    out.logits2 = cls.logits2;
    out.embedding = cls.embedding;
    out.f_C = cls.f_C;
    if (!flags_.recognition_stream) {
        out.logits3 = head3_->forward(cls.f_C);
        out.cam_features = cls.feature_map;
        return out;
    }
    RecognitionOutputs rec = recognition_forward(x_p, x_c, x_n, mode);
    out.f_R = rec.f_R;
    out.cam_features = rec.feature_map;
    if (flags_.compare) {
        out.disc_prev = discriminate(rec.h_c, rec.h_p);
        out.disc_next = discriminate(rec.h_c, rec.h_n);
    }
    if (flags_.gate) {
        out.gate = gate(rec.f_R, cls.f_C);
        out.logits3 = fuse_and_classify(rec.f_R, cls.f_C, out.gate.w_R, out.gate.w_C);
    } else {
        out.logits3 = head3_->forward(nn::concat({rec.f_R, cls.f_C}));
    }
    return out;
}

void TsccnModel::visit(const std::string& prefix, nn::ParameterVisitor& visitor) {
    using nn::join_name;
    if (flags_.compare) {
        if (cfg_.tie_branches) {
            branches_[0]->visit(join_name(prefix, "recognition.branch_shared"), visitor);
        } else {
            branches_[0]->visit(join_name(prefix, "recognition.branch_prev"), visitor);
            branches_[1]->visit(join_name(prefix, "recognition.branch_cur"), visitor);
            branches_[2]->visit(join_name(prefix, "recognition.branch_next"), visitor);
        }
        trunk_->visit(join_name(prefix, "recognition.trunk"), visitor);
    } else if (recognition_backbone_) {
        recognition_backbone_->visit(join_name(prefix, "recognition.backbone"), visitor);
    }
    classification_backbone_->visit(join_name(prefix, "classification.backbone"), visitor);
    head2_->visit(join_name(prefix, "heads.binary"), visitor);
    head3_->visit(join_name(prefix, "heads.three_class"), visitor);
    if (discriminator_) discriminator_->visit(join_name(prefix, "discriminator"), visitor);
    if (gate_) gate_->visit(join_name(prefix, "gate"), visitor);
}

}  // namespace tsccn::net
