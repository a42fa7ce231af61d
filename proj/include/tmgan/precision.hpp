#pragma once

#include "tmgan/models.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

// Elementwise precision conversion. Widening (float -> double) is exact;
// narrowing rounds to nearest.
template <typename To, typename From>
TensorT<To> cast_tensor(const TensorT<From>& t) {
    TensorT<To> out(t.shape);
    for (std::int64_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
    return out;
}

template <typename To, typename From>
GeneratorParamsT<To> cast_generator(const GeneratorParamsT<From>& gen) {
    GeneratorParamsT<To> out;
    out.arch = gen.arch;
    for (const auto& k : gen.kernels) out.kernels.push_back(cast_tensor<To>(k));
    for (const auto& b : gen.biases) out.biases.push_back(cast_tensor<To>(b));
    for (const auto& s : gen.bn_scale) out.bn_scale.push_back(cast_tensor<To>(s));
    for (const auto& s : gen.bn_shift) out.bn_shift.push_back(cast_tensor<To>(s));
    for (const auto& m : gen.bn_running_mean) out.bn_running_mean.push_back(cast_tensor<To>(m));
    for (const auto& v : gen.bn_running_var) out.bn_running_var.push_back(cast_tensor<To>(v));
    return out;
}

template <typename To, typename From>
GammaParamT<To> cast_gamma(const GammaParamT<From>& gamma) {
    GammaParamT<To> out;
    out.log_gamma = static_cast<To>(gamma.log_gamma);
    out.learnable = gamma.learnable;
    return out;
}

template <typename To, typename From>
DiscriminatorParamsT<To> cast_discriminator(const DiscriminatorParamsT<From>& disc) {
    DiscriminatorParamsT<To> out;
    out.widths = disc.widths;
    for (const auto& k : disc.kernels) out.kernels.push_back(cast_tensor<To>(k));
    for (const auto& b : disc.biases) out.biases.push_back(cast_tensor<To>(b));
    out.dense_weight = cast_tensor<To>(disc.dense_weight);
    out.dense_bias = cast_tensor<To>(disc.dense_bias);
    return out;
}

}  // namespace tmgan
