#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "isgan/core/tensor.hpp"

namespace isgan {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the dynamic computation graph.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Tensor& g) {
        if (!has_grad) {
            grad = Tensor(value.shape());
            has_grad = true;
        }
        grad.add_(g);
    }

    void clear_grad() {
        grad = Tensor();
        has_grad = false;
    }
};

/// Value-semantics handle to a graph node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    static Var leaf(Tensor value, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_ && node_->has_grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool r) { node_->requires_grad = r; }
    NodePtr node() const { return node_; }
    Node* raw() const { return node_.get(); }

    /// Leaf copy cut off from the graph.
    Var detach() const { return leaf(node_->value, false); }

    void clear_grad() { node_->clear_grad(); }

private:
    NodePtr node_;
};

/// Builds an op node. When no parent requires grad the graph edges and the
/// backward closure are dropped so evaluation-mode forwards stay cheap.
inline Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bwd) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool req = false;
    for (const auto& p : parents) req = req || p.requires_grad();
    n->requires_grad = req;
    if (req) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(bwd);
    }
    return Var(std::move(n));
}

/// Reverse-mode sweep from a scalar root. Iterative post-order so deep
/// generator/discriminator graphs cannot overflow the stack.
inline void backward(const Var& root) {
    if (!root.defined()) throw std::invalid_argument("backward: undefined root");
    if (root.value().numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!root.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.raw(), 0);
    visited.insert(root.raw());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.raw()->accumulate(Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad) n->backward_fn(*n);
    }
}

}  // namespace isgan
