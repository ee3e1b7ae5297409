#pragma once

// Minimal reverse-mode differentiation.
//
// A Var is a handle to a graph node holding a value, an optional gradient
// buffer and, for op results, the parent nodes plus a backward rule. Ops on
// Vars that do not require gradients produce constants and record nothing.
// backward() orders the reachable nodes topologically and replays the rules
// once each in reverse order, accumulating gradients additively.

#include <functional>
#include <memory>
#include <vector>

#include "pansharp/tensor.hpp"

namespace pansharp {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_rule;

    void accumulate(const Tensor<T>& g);
};

template <typename T>
class Var {
public:
    Var() = default;

    static Var constant(Tensor<T> value);
    static Var parameter(Tensor<T> value);

    bool defined() const { return static_cast<bool>(node_); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    const Tensor<T>& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    // Optimizer-only write access; never mutate a value that is part of a live graph.
    Tensor<T>& mutable_value() { return node_->value; }

    // Gradient after backward(); zeros of the value's shape when nothing reached it.
    Tensor<T> grad() const;
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    void zero_grad() const {
        if (node_) node_->grad = Tensor<T>();
    }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

    // Builds an op result. `rule(self)` must push gradients into self.parents.
    static Var from_op(Tensor<T> value, std::vector<Var> inputs, std::function<void(Node<T>&)> rule);

private:
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
    std::shared_ptr<Node<T>> node_;
};

// Nodes reachable from `root` that require gradients, parents before children.
template <typename T>
std::vector<Node<T>*> topological_order(const Var<T>& root);

// Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError for a non-scalar loss.
template <typename T>
void backward(const Var<T>& loss);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scalar_mul(const Var<T>& a, T c);
// s is a learnable one-element tensor broadcast over x.
template <typename T>
Var<T> scale_by(const Var<T>& s, const Var<T>& x);
template <typename T>
Var<T> sum(const Var<T>& a);
// Sum of elementwise products with a constant weight tensor.
template <typename T>
Var<T> weighted_sum(const Var<T>& a, const Tensor<T>& weights);
// mean |prediction - target|; subgradient 0 at equality.
template <typename T>
Var<T> l1_loss(const Var<T>& prediction, const Var<T>& target);

}  // namespace pansharp
