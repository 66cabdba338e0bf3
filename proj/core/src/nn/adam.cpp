#include "tsccn/nn/adam.hpp"

#include <cmath>

#include "tsccn/error.hpp"

namespace tsccn::nn {

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    if (!(opt_.learning_rate > 0.0)) throw InvalidArgument("Adam: learning rate must be positive");
    if (!(opt_.beta1 >= 0.0 && opt_.beta1 < 1.0 && opt_.beta2 >= 0.0 && opt_.beta2 < 1.0))
        throw InvalidArgument("Adam: betas must lie in [0, 1)");
    for (const auto& p : params_) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(opt_.beta1), b2 = static_cast<float>(opt_.beta2);
    const auto step_size = static_cast<float>(opt_.learning_rate / c1);
    const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
    const auto eps = static_cast<float>(opt_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Var& p = params_[i];
        if (!p.has_grad()) continue;
        const float* g = p.grad().data();
        float* w = p.mutable_value().data();
        float* m = m_[i].data();
        float* v = v_[i].data();
        const std::size_t n = p.value().size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            w[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace tsccn::nn
