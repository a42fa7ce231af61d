#pragma once

// Raw numeric kernels on tensors. No tape, no allocation tricks — these are
// the functions both the autodiff layer and the serial reference tests build
// on.
//
// Parallelism policy: OpenMP loops only ever split work across *output*
// elements, and the accumulation order within one output element is a fixed
// serial loop. Results are therefore bitwise identical for any thread count,
// which the determinism guarantees (checkpoint resume, repeated pipelines)
// rely on. Reductions that cross output elements (sum, mean, ...) use a
// serial pairwise tree instead of an OpenMP reduction for the same reason.

#include <cmath>
#include <cstdint>
#include <limits>

#include "tmgan/common.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

// Deterministic pairwise summation; also better conditioned than a running
// sum.
template <typename T>
T pairwise_sum(const T* p, std::int64_t n) {
    if (n <= 8) {
        T acc = T(0);
        for (std::int64_t i = 0; i < n; ++i) acc += p[i];
        return acc;
    }
    const std::int64_t mid = n / 2;
    return pairwise_sum(p, mid) + pairwise_sum(p + mid, n - mid);
}

template <typename T>
T pairwise_sum_squares(const T* p, std::int64_t n) {
    if (n <= 8) {
        T acc = T(0);
        for (std::int64_t i = 0; i < n; ++i) acc += p[i] * p[i];
        return acc;
    }
    const std::int64_t mid = n / 2;
    return pairwise_sum_squares(p, mid) + pairwise_sum_squares(p + mid, n - mid);
}

inline int conv_out_dim(int in, int k, int stride, int padding) {
    return (in + 2 * padding - k) / stride + 1;
}

template <typename T>
void conv2d_check_shapes(const TensorT<T>& input, const TensorT<T>& kernel,
                         const TensorT<T>& bias, int stride, int padding) {
    require(input.ndim() == 4, "conv2d: input must be [N,C,H,W], got " +
                                   shape_to_string(input.shape));
    require(kernel.ndim() == 4, "conv2d: kernel must be [Co,Ci,kH,kW], got " +
                                    shape_to_string(kernel.shape));
    require(bias.ndim() == 1 && bias.dim(0) == kernel.dim(0),
            "conv2d: bias shape " + shape_to_string(bias.shape) +
                " does not match output channels " + std::to_string(kernel.dim(0)));
    require(input.dim(1) == kernel.dim(1),
            "conv2d: input channels " + std::to_string(input.dim(1)) +
                " != kernel channels " + std::to_string(kernel.dim(1)));
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(padding >= 0, "conv2d: padding must be >= 0");
    require(kernel.dim(2) <= input.dim(2) + 2 * padding &&
                kernel.dim(3) <= input.dim(3) + 2 * padding,
            "conv2d: kernel " + shape_to_string(kernel.shape) +
                " larger than padded input " + shape_to_string(input.shape));
}

// Cross-correlation (no kernel flip), zero padding. Output [N,Co,Ho,Wo].
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel,
                          const TensorT<T>& bias, int stride, int padding) {
    conv2d_check_shapes(input, kernel, bias, stride, padding);
    const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = kernel.dim(0), kH = kernel.dim(2), kW = kernel.dim(3);
    const int Ho = conv_out_dim(H, kH, stride, padding);
    const int Wo = conv_out_dim(W, kW, stride, padding);

    TensorT<T> out({N, Co, Ho, Wo});
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            for (int ho = 0; ho < Ho; ++ho) {
                for (int wo = 0; wo < Wo; ++wo) {
                    T acc = bias[co];
                    for (int ci = 0; ci < Ci; ++ci) {
                        for (int r = 0; r < kH; ++r) {
                            const int ih = ho * stride - padding + r;
                            if (ih < 0 || ih >= H) continue;
                            for (int c = 0; c < kW; ++c) {
                                const int iw = wo * stride - padding + c;
                                if (iw < 0 || iw >= W) continue;
                                acc += input.at4(n, ci, ih, iw) * kernel.at4(co, ci, r, c);
                            }
                        }
                    }
                    out.at4(n, co, ho, wo) = acc;
                }
            }
        }
    }
    return out;
}

// Gradient w.r.t. the input: gather form, one output plane per (n, ci).
template <typename T>
TensorT<T> conv2d_backward_input(const TensorT<T>& grad_out, const TensorT<T>& kernel,
                                 const Shape& input_shape, int stride, int padding) {
    const int N = input_shape[0], Ci = input_shape[1], H = input_shape[2], W = input_shape[3];
    const int Co = kernel.dim(0), kH = kernel.dim(2), kW = kernel.dim(3);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);

    TensorT<T> grad_in(input_shape);
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n) {
        for (int ci = 0; ci < Ci; ++ci) {
            for (int ih = 0; ih < H; ++ih) {
                for (int iw = 0; iw < W; ++iw) {
                    T acc = T(0);
                    for (int co = 0; co < Co; ++co) {
                        for (int r = 0; r < kH; ++r) {
                            const int num = ih + padding - r;
                            if (num < 0 || num % stride != 0) continue;
                            const int ho = num / stride;
                            if (ho >= Ho) continue;
                            for (int c = 0; c < kW; ++c) {
                                const int numw = iw + padding - c;
                                if (numw < 0 || numw % stride != 0) continue;
                                const int wo = numw / stride;
                                if (wo >= Wo) continue;
                                acc += grad_out.at4(n, co, ho, wo) * kernel.at4(co, ci, r, c);
                            }
                        }
                    }
                    grad_in.at4(n, ci, ih, iw) = acc;
                }
            }
        }
    }
    return grad_in;
}

template <typename T>
TensorT<T> conv2d_backward_kernel(const TensorT<T>& grad_out, const TensorT<T>& input,
                                  const Shape& kernel_shape, int stride, int padding) {
    const int N = input.dim(0), H = input.dim(2), W = input.dim(3);
    const int Co = kernel_shape[0], Ci = kernel_shape[1], kH = kernel_shape[2], kW = kernel_shape[3];
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);

    TensorT<T> grad_k(kernel_shape);
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < Co; ++co) {
        for (int ci = 0; ci < Ci; ++ci) {
            for (int r = 0; r < kH; ++r) {
                for (int c = 0; c < kW; ++c) {
                    T acc = T(0);
                    for (int n = 0; n < N; ++n) {
                        for (int ho = 0; ho < Ho; ++ho) {
                            const int ih = ho * stride - padding + r;
                            if (ih < 0 || ih >= H) continue;
                            for (int wo = 0; wo < Wo; ++wo) {
                                const int iw = wo * stride - padding + c;
                                if (iw < 0 || iw >= W) continue;
                                acc += grad_out.at4(n, co, ho, wo) * input.at4(n, ci, ih, iw);
                            }
                        }
                    }
                    grad_k.at4(co, ci, r, c) = acc;
                }
            }
        }
    }
    return grad_k;
}

template <typename T>
TensorT<T> conv2d_backward_bias(const TensorT<T>& grad_out) {
    const int N = grad_out.dim(0), Co = grad_out.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(grad_out.dim(2)) * grad_out.dim(3);
    TensorT<T> grad_b({Co});
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Co; ++co) {
        T acc = T(0);
        for (int n = 0; n < N; ++n)
            acc += pairwise_sum(&grad_out.data[static_cast<std::size_t>(grad_out.off4(n, co, 0, 0))],
                                plane);
        grad_b[co] = acc;
    }
    return grad_b;
}

// ---- activations --------------------------------------------------------

template <typename T>
void check_activation_input(const TensorT<T>& x, const char* name) {
    require(x.finite(), std::string(name) + ": non-finite input");
}

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& x) {
    check_activation_input(x, "relu");
    TensorT<T> out(x.shape);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> leaky_relu_forward(const TensorT<T>& x, T slope) {
    require(slope > T(0) && slope < T(1), "leaky_relu: slope must be in (0,1)");
    check_activation_input(x, "leaky_relu");
    TensorT<T> out(x.shape);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
    return out;
}

// Numerically stable sigmoid, clamped into the open interval (0,1) so the
// discriminator head honours its range contract even for saturating inputs.
template <typename T>
T sigmoid_scalar(T x) {
    T p;
    if (x >= T(0)) {
        const T e = std::exp(-x);
        p = T(1) / (T(1) + e);
    } else {
        const T e = std::exp(x);
        p = e / (T(1) + e);
    }
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    if (p < lo) p = lo;
    if (p > hi) p = hi;
    return p;
}

template <typename T>
TensorT<T> sigmoid_forward(const TensorT<T>& x) {
    check_activation_input(x, "sigmoid");
    TensorT<T> out(x.shape);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(x[i]);
    return out;
}

// ---- batch normalization ------------------------------------------------

template <typename T>
struct BatchNormCache {
    TensorT<T> x_hat;      // normalized input, saved for backward
    std::vector<T> mean;   // per-channel batch mean
    std::vector<T> inv_std;  // per-channel 1/sqrt(var + eps)
};

// Train mode normalizes by batch statistics and updates running stats
// (biased variance, momentum 0.1); eval mode uses the running stats.
template <typename T>
TensorT<T> batch_norm_forward(const TensorT<T>& x, const TensorT<T>& scale,
                              const TensorT<T>& shift, bool train_mode,
                              TensorT<T>& running_mean, TensorT<T>& running_var, T epsilon,
                              BatchNormCache<T>* cache = nullptr, T momentum = T(0.1)) {
    require(x.ndim() == 4, "batch_norm: input must be [N,C,H,W]");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(scale.ndim() == 1 && scale.dim(0) == C && shift.ndim() == 1 && shift.dim(0) == C,
            "batch_norm: scale/shift must be [C]");
    require(running_mean.dim(0) == C && running_var.dim(0) == C,
            "batch_norm: running stats must be [C]");
    const std::int64_t per_channel = static_cast<std::int64_t>(N) * H * W;
    if (train_mode)
        require(per_channel >= 2, "batch_norm: train mode needs N*H*W >= 2 (variance undefined)");

    TensorT<T> out(x.shape);
    if (cache) {
        cache->x_hat = TensorT<T>(x.shape);
        cache->mean.assign(static_cast<std::size_t>(C), T(0));
        cache->inv_std.assign(static_cast<std::size_t>(C), T(0));
    }

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        T mean, var;
        if (train_mode) {
            // Gather channel values in a fixed order for a deterministic
            // pairwise reduction.
            std::vector<T> vals(static_cast<std::size_t>(per_channel));
            std::int64_t k = 0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) vals[static_cast<std::size_t>(k++)] = x.at4(n, c, h, w);
            mean = pairwise_sum(vals.data(), per_channel) / static_cast<T>(per_channel);
            for (T& v : vals) v -= mean;
            var = pairwise_sum_squares(vals.data(), per_channel) / static_cast<T>(per_channel);
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const T inv_std = T(1) / std::sqrt(var + epsilon);
        if (cache) {
            cache->mean[static_cast<std::size_t>(c)] = mean;
            cache->inv_std[static_cast<std::size_t>(c)] = inv_std;
        }
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const T xh = (x.at4(n, c, h, w) - mean) * inv_std;
                    if (cache) cache->x_hat.at4(n, c, h, w) = xh;
                    out.at4(n, c, h, w) = scale[c] * xh + shift[c];
                }
    }
    return out;
}

// Backward through train-mode batch norm. Returns grad_x; accumulates into
// grad_scale/grad_shift.
template <typename T>
TensorT<T> batch_norm_backward(const TensorT<T>& grad_out, const TensorT<T>& scale,
                               const BatchNormCache<T>& cache, TensorT<T>& grad_scale,
                               TensorT<T>& grad_shift) {
    const int N = grad_out.dim(0), C = grad_out.dim(1), H = grad_out.dim(2), W = grad_out.dim(3);
    const std::int64_t m = static_cast<std::int64_t>(N) * H * W;
    TensorT<T> grad_x(grad_out.shape);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        std::vector<T> g(static_cast<std::size_t>(m)), gx(static_cast<std::size_t>(m));
        std::int64_t k = 0;
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const T go = grad_out.at4(n, c, h, w);
                    g[static_cast<std::size_t>(k)] = go;
                    gx[static_cast<std::size_t>(k)] = go * cache.x_hat.at4(n, c, h, w);
                    ++k;
                }
        const T sum_g = pairwise_sum(g.data(), m);
        const T sum_gx = pairwise_sum(gx.data(), m);
        grad_shift[c] += sum_g;
        grad_scale[c] += sum_gx;

        const T inv_m = T(1) / static_cast<T>(m);
        const T a = scale[c] * cache.inv_std[static_cast<std::size_t>(c)];
        for (int n = 0; n < N; ++n)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const T go = grad_out.at4(n, c, h, w);
                    const T xh = cache.x_hat.at4(n, c, h, w);
                    grad_x.at4(n, c, h, w) = a * (go - inv_m * sum_g - xh * inv_m * sum_gx);
                }
    }
    return grad_x;
}

// ---- dense / pooling ----------------------------------------------------

// x [N,F] * weight [O,F] + bias [O] -> [N,O]
template <typename T>
TensorT<T> dense_forward(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias) {
    require(x.ndim() == 2 && weight.ndim() == 2 && bias.ndim() == 1, "dense: bad ranks");
    const int N = x.dim(0), F = x.dim(1), O = weight.dim(0);
    require(weight.dim(1) == F, "dense: weight columns " + std::to_string(weight.dim(1)) +
                                    " != input features " + std::to_string(F));
    require(bias.dim(0) == O, "dense: bias size mismatch");
    TensorT<T> out({N, O});
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            T acc = bias[o];
            for (int f = 0; f < F; ++f)
                acc += x[static_cast<std::int64_t>(n) * F + f] *
                       weight[static_cast<std::int64_t>(o) * F + f];
            out[static_cast<std::int64_t>(n) * O + o] = acc;
        }
    return out;
}

// [N,C,H,W] -> [N,C] channel means.
template <typename T>
TensorT<T> global_avg_pool_forward(const TensorT<T>& x) {
    require(x.ndim() == 4, "global_avg_pool: input must be [N,C,H,W]");
    const int N = x.dim(0), C = x.dim(1);
    const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    TensorT<T> out({N, C});
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            out[static_cast<std::int64_t>(n) * C + c] =
                pairwise_sum(&x.data[static_cast<std::size_t>(x.off4(n, c, 0, 0))], plane) /
                static_cast<T>(plane);
    return out;
}

}  // namespace tmgan
