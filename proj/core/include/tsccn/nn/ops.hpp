#pragma once

#include <vector>

#include "tsccn/nn/autograd.hpp"

namespace tsccn::nn {

struct Conv2dSpec {
    int stride = 1;
    int padding = 0;
};

// Running statistics owned by a batch-norm layer, updated in training mode.
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    float momentum = 0.1f;
    float eps = 1e-5f;
};

// x: (N, C, H, W), weight: (Cout, C, K, K). No bias.
Var conv2d(const Var& x, const Var& weight, Conv2dSpec spec);

// Per-channel normalization over (N, H, W). Uses batch statistics and
// updates `state` when training; uses running statistics otherwise.
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training);

Var relu(const Var& x);
Var sigmoid(const Var& x);
// eps + (1 - 2 eps) * sigmoid(x): stays strictly inside (0, 1) in float32.
Var bounded_sigmoid(const Var& x, float eps);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, float factor);
Var max_pool2d(const Var& x, int kernel, int stride, int padding);

// (N, C, H, W) -> (N, C)
Var global_avg_pool(const Var& x);

// x: (N, in), weight: (out, in), bias: (out) or undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

// Concatenate along axis 1 (channels for 4-D, features for 2-D).
Var concat(const std::vector<Var>& parts);

// (N, K) -> (N, 1), column j.
Var column(const Var& x, int j);

// Element-wise a / b, identical shapes.
Var divide(const Var& a, const Var& b);

// x: (N, D), s: (N, 1); row i of x scaled by s[i].
Var scale_rows(const Var& x, const Var& s);

// Row-wise x / ||x||_2 on (N, D).
Var l2_normalize_rows(const Var& x, float eps = 1e-12f);

}  // namespace tsccn::nn
