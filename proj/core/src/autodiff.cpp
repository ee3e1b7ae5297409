#include "pansharp/autodiff.hpp"

#include <unordered_set>

namespace pansharp {

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
    if (!requires_grad) return;
    if (grad.empty()) {
        grad = g;
        return;
    }
    require_same_shape(grad, g, "gradient accumulation");
    auto dst = grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
}

template <typename T>
Var<T> Var<T>::parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

template <typename T>
Tensor<T> Var<T>::grad() const {
    if (node_->grad.empty()) return Tensor<T>(node_->value.shape());
    return node_->grad;
}

template <typename T>
Var<T> Var<T>::from_op(Tensor<T> value, std::vector<Var> inputs, std::function<void(Node<T>&)> rule) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& in : inputs) {
        if (in.requires_grad()) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) {
        n->parents.reserve(inputs.size());
        for (auto& in : inputs) n->parents.push_back(in.node_);
        n->backward_rule = std::move(rule);
    }
    return Var(std::move(n));
}

template <typename T>
std::vector<Node<T>*> topological_order(const Var<T>& root) {
    std::vector<Node<T>*> order;
    if (!root.requires_grad()) return order;
    std::unordered_set<Node<T>*> visited;
    // Iterative post-order DFS; graphs can be a few hundred nodes deep.
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

template <typename T>
void backward(const Var<T>& loss) {
    if (loss.value().size() != 1)
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;
    auto order = topological_order(loss);
    loss.node()->accumulate(Tensor<T>(loss.shape(), T(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_rule && !n->grad.empty()) n->backward_rule(*n);
    }
    // Intermediate grads are not needed past this point.
    for (Node<T>* n : order)
        if (n->backward_rule) n->grad = Tensor<T>();
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor<T> out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return Var<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor<T> out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return Var<T>::from_op(std::move(out), {a, b}, [](Node<T>& self) {
        self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor<T> g = self.grad;
            for (T& v : g.data()) v = -v;
            self.parents[1]->accumulate(g);
        }
    });
}

template <typename T>
Var<T> scalar_mul(const Var<T>& a, T c) {
    Tensor<T> out = a.value();
    for (T& v : out.data()) v *= c;
    return Var<T>::from_op(std::move(out), {a}, [c](Node<T>& self) {
        Tensor<T> g = self.grad;
        for (T& v : g.data()) v *= c;
        self.parents[0]->accumulate(g);
    });
}

template <typename T>
Var<T> scale_by(const Var<T>& s, const Var<T>& x) {
    if (s.value().size() != 1) throw ShapeError("scale_by: scale must have one element, got " + shape_str(s.shape()));
    const T c = s.value()[0];
    Tensor<T> out = x.value();
    for (T& v : out.data()) v *= c;
    return Var<T>::from_op(std::move(out), {s, x}, [](Node<T>& self) {
        Node<T>& s_node = *self.parents[0];
        Node<T>& x_node = *self.parents[1];
        if (s_node.requires_grad) {
            T acc = 0;
            auto g = self.grad.data();
            auto xv = x_node.value.data();
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
            s_node.accumulate(Tensor<T>(s_node.value.shape(), acc));
        }
        if (x_node.requires_grad) {
            Tensor<T> g = self.grad;
            const T c = s_node.value[0];
            for (T& v : g.data()) v *= c;
            x_node.accumulate(g);
        }
    });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
    T acc = 0;
    for (T v : a.value().data()) acc += v;
    return Var<T>::from_op(Tensor<T>({1}, acc), {a}, [](Node<T>& self) {
        self.parents[0]->accumulate(Tensor<T>(self.parents[0]->value.shape(), self.grad[0]));
    });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& a, const Tensor<T>& weights) {
    require_same_shape(a.value(), weights, "weighted_sum");
    T acc = 0;
    auto av = a.value().data();
    auto wv = weights.data();
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * wv[i];
    return Var<T>::from_op(Tensor<T>({1}, acc), {a}, [weights](Node<T>& self) {
        Tensor<T> g = weights;
        const T s = self.grad[0];
        for (T& v : g.data()) v *= s;
        self.parents[0]->accumulate(g);
    });
}

template <typename T>
Var<T> l1_loss(const Var<T>& prediction, const Var<T>& target) {
    require_same_shape(prediction.value(), target.value(), "l1_loss");
    const std::size_t count = prediction.value().size();
    if (count == 0) throw ShapeError("l1_loss: empty tensors");
    auto p = prediction.value().data();
    auto t = target.value().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
    const T loss = static_cast<T>(acc / static_cast<double>(count));
    return Var<T>::from_op(Tensor<T>({1}, loss), {prediction, target}, [count](Node<T>& self) {
        Node<T>& pn = *self.parents[0];
        Node<T>& tn = *self.parents[1];
        const T scale = self.grad[0] / static_cast<T>(count);
        Tensor<T> g(pn.value.shape());
        auto gv = g.data();
        auto pv = pn.value.data();
        auto tv = tn.value.data();
        for (std::size_t i = 0; i < gv.size(); ++i) {
            const T d = pv[i] - tv[i];
            gv[i] = d > 0 ? scale : (d < 0 ? -scale : T(0));
        }
        pn.accumulate(g);
        if (tn.requires_grad) {
            for (T& v : g.data()) v = -v;
            tn.accumulate(g);
        }
    });
}

#define PANSHARP_INSTANTIATE(T)                                                   \
    template struct Node<T>;                                                      \
    template class Var<T>;                                                        \
    template std::vector<Node<T>*> topological_order<T>(const Var<T>&);           \
    template void backward<T>(const Var<T>&);                                     \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                         \
    template Var<T> sub<T>(const Var<T>&, const Var<T>&);                         \
    template Var<T> scalar_mul<T>(const Var<T>&, T);                              \
    template Var<T> scale_by<T>(const Var<T>&, const Var<T>&);                    \
    template Var<T> sum<T>(const Var<T>&);                                        \
    template Var<T> weighted_sum<T>(const Var<T>&, const Tensor<T>&);             \
    template Var<T> l1_loss<T>(const Var<T>&, const Var<T>&);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

}  // namespace pansharp
