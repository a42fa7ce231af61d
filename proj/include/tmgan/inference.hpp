#pragma once

#include "tmgan/common.hpp"
#include "tmgan/models.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

// Whole-image enhancement: the network is fully convolutional, so a
// patch-trained generator applies to any [H,W] image directly.
template <typename T>
TensorT<T> enhance(const GeneratorParamsT<T>& gen, const TensorT<T>& y) {
    require(y.ndim() == 2, "enhance: expected a [H,W] image, got " + shape_to_string(y.shape));
    require(y.dim(0) >= 3 && y.dim(1) >= 3, "enhance: image smaller than the 3x3 kernel support");
    TensorT<T> wrapped({1, 1, y.dim(0), y.dim(1)});
    for (std::int64_t i = 0; i < y.size(); ++i) wrapped[i] = y[i];
    const TensorT<T> out4 = generator_apply(gen, wrapped);
    TensorT<T> out(y.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out4[i];
    return out;
}

// Pixelwise convex combination of the texture-matched and bias-reduced
// outputs. The endpoints return the inputs untouched, so eta = 0 and
// eta = 1 are bitwise exact.
template <typename T>
TensorT<T> blend(const TensorT<T>& x_tmgan, const TensorT<T>& x_br, double eta) {
    require(x_tmgan.same_shape(x_br), "blend: shape mismatch " + shape_to_string(x_tmgan.shape) +
                                          " vs " + shape_to_string(x_br.shape));
    require(eta >= 0.0 && eta <= 1.0, "blend: eta must lie in [0, 1]");
    if (eta == 1.0) return x_tmgan;
    if (eta == 0.0) return x_br;
    const T w = static_cast<T>(eta);
    const T wc = T(1) - w;
    TensorT<T> out(x_tmgan.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = w * x_tmgan[i] + wc * x_br[i];
    return out;
}

}  // namespace tmgan
