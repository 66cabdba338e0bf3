#pragma once

#include <vector>

#include "tsccn/nn/autograd.hpp"

namespace tsccn::nn {

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Parameters without a
// gradient after backward() are skipped for that step.
class Adam {
public:
    Adam(std::vector<Var> params, AdamOptions options);

    void step();
    void zero_grad();
    long steps() const { return t_; }
    const AdamOptions& options() const { return opt_; }

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamOptions opt_;
    long t_ = 0;
};

}  // namespace tsccn::nn
