#include "tsccn/nn/autograd.hpp"

#include <unordered_set>

#include "tsccn/error.hpp"

namespace tsccn::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

void Node::accumulate_grad(const Tensor& g) {
    if (g.shape() != value.shape())
        throw ShapeMismatch("gradient shape " + shape_string(g.shape()) + " does not match value " +
                            shape_string(value.shape()));
    if (grad.empty())
        grad = g;
    else
        grad.add_(g);
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::from_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
    Var out(std::move(value), false);
    if (!g_grad_enabled) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
    out.node_->backward_fn = std::move(backward_fn);
    return out;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
    // Iterative post-order DFS gives a topological order (inputs before users).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    for (const auto& [root, seed] : seeds) {
        if (!root.requires_grad()) continue;
        Node* start = root.node().get();
        if (visited.count(start)) continue;
        visited.insert(start);
        stack.emplace_back(start, 0);
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                Node* child = node->inputs[next++].get();
                if (child->requires_grad && !visited.count(child)) {
                    visited.insert(child);
                    stack.emplace_back(child, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    for (const auto& [root, seed] : seeds) {
        if (root.requires_grad()) root.node()->accumulate_grad(seed);
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward_fn) continue;  // leaf
        if (node->grad.empty()) continue;  // not reached by any seed
        node->backward_fn(*node);
        if (!node->retain_grad) node->grad = Tensor();
    }
}

}  // namespace tsccn::nn
