#pragma once

// Serial reference implementations, kept alongside the OpenMP kernels as
// test oracles and benchmark baselines. The reference convolution is the
// classic six-nested-loop form with the same per-element accumulation order
// as the parallel kernel, so the two must agree bitwise — any divergence is
// a bug, not floating-point noise.

#include "tmgan/kernels.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

template <typename T>
TensorT<T> conv2d_forward_serial(const TensorT<T>& input, const TensorT<T>& kernel,
                                 const TensorT<T>& bias, int stride, int padding) {
    conv2d_check_shapes(input, kernel, bias, stride, padding);
    const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = kernel.dim(0), kH = kernel.dim(2), kW = kernel.dim(3);
    const int Ho = conv_out_dim(H, kH, stride, padding);
    const int Wo = conv_out_dim(W, kW, stride, padding);

    TensorT<T> out({N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    T acc = bias[co];
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int r = 0; r < kH; ++r)
                            for (int c = 0; c < kW; ++c) {
                                const int ih = ho * stride - padding + r;
                                const int iw = wo * stride - padding + c;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += input.at4(n, ci, ih, iw) * kernel.at4(co, ci, r, c);
                            }
                    out.at4(n, co, ho, wo) = acc;
                }
    return out;
}

template <typename T>
TensorT<T> relu_forward_serial(const TensorT<T>& x) {
    TensorT<T> out(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> global_avg_pool_forward_serial(const TensorT<T>& x) {
    const int N = x.dim(0), C = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    TensorT<T> out({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            out[static_cast<std::int64_t>(n) * C + c] =
                pairwise_sum(&x.data[static_cast<std::size_t>(x.off4(n, c, 0, 0))], plane) /
                static_cast<T>(plane);
    return out;
}

}  // namespace tmgan
