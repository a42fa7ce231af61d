#pragma once

// Standard Adam with bias correction (defaults beta1=0.9, beta2=0.999,
// eps=1e-8). State is per-tensor first/second moments plus a shared step
// counter, all serialized into checkpoints so training resumes bitwise.

#include <cstdint>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

template <typename T>
struct AdamStateT {
    std::int64_t step = 0;
    std::vector<TensorT<T>> first_moment;
    std::vector<TensorT<T>> second_moment;

    // Zero-initialized moments matching the given parameter shapes.
    static AdamStateT for_params(const std::vector<TensorT<T>*>& params) {
        AdamStateT s;
        for (const TensorT<T>* p : params) {
            s.first_moment.emplace_back(p->shape);
            s.second_moment.emplace_back(p->shape);
        }
        return s;
    }
};

using AdamState = AdamStateT<double>;

template <typename T>
void adam_step(const std::vector<TensorT<T>*>& params,
               const std::vector<const TensorT<T>*>& grads, AdamStateT<T>& state, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999), T epsilon = T(1e-8)) {
    require(lr > T(0), "adam: learning rate must be positive");
    require(params.size() == grads.size(), "adam: params/grads count mismatch");
    require(params.size() == state.first_moment.size(),
            "adam: state tracks " + std::to_string(state.first_moment.size()) +
                " tensors, got " + std::to_string(params.size()));
    // Validate everything before touching any state: a rejected step must
    // leave parameters and moments untouched.
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(params[i]->same_shape(state.first_moment[i]),
                "adam: state shape mismatch at tensor " + std::to_string(i));
        require(grads[i]->same_shape(*params[i]),
                "adam: gradient shape mismatch at tensor " + std::to_string(i));
        require(grads[i]->finite(), "adam: non-finite gradient at tensor " + std::to_string(i));
    }

    state.step += 1;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(state.step));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = *params[i];
        const TensorT<T>& g = *grads[i];
        TensorT<T>& m = state.first_moment[i];
        TensorT<T>& v = state.second_moment[i];
        for (std::int64_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (T(1) - beta1) * g[j];
            v[j] = beta2 * v[j] + (T(1) - beta2) * g[j] * g[j];
            const T m_hat = m[j] / bc1;
            const T v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
        }
    }
}

}  // namespace tmgan
