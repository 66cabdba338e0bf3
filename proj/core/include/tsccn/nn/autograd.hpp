#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "tsccn/nn/tensor.hpp"

namespace tsccn::nn {

// A node of the dynamically recorded computation graph. Gradients flow from
// a node into its inputs through backward_fn, which reads node.grad.
struct Node {
    Tensor value;
    Tensor grad;  // empty until something accumulates into it
    bool requires_grad = false;
    bool retain_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    void accumulate_grad(const Tensor& g);
};

// Handle to a graph node. Copying a Var aliases the same node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    int dim(int axis) const { return node_->value.dim(axis); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    const Tensor& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Tensor(); }

    // Keep this node's gradient after backward() for inspection (e.g. CAM).
    void retain_grad() { node_->retain_grad = true; }

    const std::shared_ptr<Node>& node() const noexcept { return node_; }
    bool same_node(const Var& other) const noexcept { return node_ == other.node_; }

    // Builds the result node of an op; records inputs and backward_fn only
    // when gradient mode is on and some input requires a gradient.
    static Var from_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Reverse-mode sweep seeded by (root, d loss / d root) pairs. Leaf gradients
// accumulate; intermediate gradients are released unless retained.
void backward(const std::vector<std::pair<Var, Tensor>>& seeds);

}  // namespace tsccn::nn
