#include "pansharp/adam.hpp"

#include <cmath>

namespace pansharp {

template <typename T>
AdamState<T>::AdamState(AdamOptions opts, const std::vector<Var<T>>& params) : options(opts) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.shape());
        v.emplace_back(p.shape());
    }
}

template <typename T>
void adam_step(std::vector<Var<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.m.size()) +
                         " moment buffers");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i].value(), grads[i], "adam_step param/grad");
        require_same_shape(params[i].value(), state.m[i], "adam_step param/state");
        require_same_shape(params[i].value(), state.v[i], "adam_step param/state");
    }
    state.t += 1;
    const auto& o = state.options;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].mutable_value().data();
        auto g = grads[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = o.beta1 * static_cast<double>(m[j]) + (1.0 - o.beta1) * gj;
            const double vj = o.beta2 * static_cast<double>(v[j]) + (1.0 - o.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double m_hat = mj / c1;
            const double v_hat = vj / c2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) - o.lr * m_hat / (std::sqrt(v_hat) + o.eps));
        }
    }
}

template <typename T>
void adam_step(std::vector<Var<T>>& params, AdamState<T>& state) {
    std::vector<Tensor<T>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(p.grad());
    adam_step(params, grads, state);
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::vector<Var<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Var<double>>&, AdamState<double>&);
template void adam_step<float>(std::vector<Var<float>>&, const std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Var<double>>&, const std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace pansharp
