#pragma once

// The enhancement generator (one parameter set, applied Siamese-style to
// both corrupted inputs), the texture-difference discriminator, and the
// learnable scale γ.
//
// Generator: residual convolutional denoiser — predict the noise, subtract
// it from the input. First layer Conv+ReLU, middle layers
// Conv(+optional BN)+ReLU, final Conv back to one channel; 3x3 kernels,
// padding 1, stride 1 throughout. The final layer is zero-initialized so a
// fresh network is exactly the identity.
//
// Discriminator: four stride-2 3x3 conv blocks with LeakyReLU(0.2),
// channel ladder 32/64/128/256 scaled by one width multiplier, global
// average pool, dense head, sigmoid. The multiplier is chosen at
// construction so the trainable parameter count lands within a factor of
// two of the generator's.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/tape.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

struct GeneratorArch {
    int depth = 7;        // number of conv layers (desk default; paper scale is 17)
    int width = 32;       // hidden channels (paper scale is 64)
    bool batch_norm = false;

    void validate() const {
        require(depth >= 3, "generator: depth must be at least 3");
        require(width >= 1, "generator: width must be positive");
    }
};

template <typename T>
struct GeneratorParamsT {
    GeneratorArch arch;
    std::vector<TensorT<T>> kernels;  // depth entries
    std::vector<TensorT<T>> biases;   // depth entries
    // Present only when arch.batch_norm; one entry per middle layer.
    std::vector<TensorT<T>> bn_scale, bn_shift;
    std::vector<TensorT<T>> bn_running_mean, bn_running_var;  // not trainable

    std::vector<TensorT<T>*> trainable() {
        std::vector<TensorT<T>*> out;
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            out.push_back(&kernels[i]);
            out.push_back(&biases[i]);
            if (arch.batch_norm && i >= 1 && i + 1 < kernels.size()) {
                out.push_back(&bn_scale[i - 1]);
                out.push_back(&bn_shift[i - 1]);
            }
        }
        return out;
    }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& k : kernels) n += k.size();
        for (const auto& b : biases) n += b.size();
        for (const auto& s : bn_scale) n += s.size();
        for (const auto& s : bn_shift) n += s.size();
        return n;
    }
};

using GeneratorParams = GeneratorParamsT<double>;

template <typename T>
struct GammaParamT {
    // γ is kept positive by construction: the stored value is log γ and
    // every read maps through exp.
    T log_gamma = T(0);
    bool learnable = true;

    T gamma() const { return std::exp(log_gamma); }
};

using GammaParam = GammaParamT<double>;

namespace detail {

template <typename T>
TensorT<T> he_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
    TensorT<T> t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(-limit, limit));
    return t;
}

}  // namespace detail

template <typename T>
GeneratorParamsT<T> init_generator(const GeneratorArch& arch, std::uint64_t seed) {
    arch.validate();
    GeneratorParamsT<T> p;
    p.arch = arch;
    const int D = arch.depth, Wd = arch.width;
    for (int layer = 0; layer < D; ++layer) {
        const int ci = layer == 0 ? 1 : Wd;
        const int co = layer == D - 1 ? 1 : Wd;
        if (layer == D - 1) {
            // Zero residual at init: the fresh generator is the identity.
            p.kernels.emplace_back(Shape{co, ci, 3, 3});
            p.biases.emplace_back(Shape{co});
        } else {
            Rng rng = Rng::stream(seed, stream_key("gen_layer"), static_cast<std::uint64_t>(layer));
            p.kernels.push_back(detail::he_uniform<T>({co, ci, 3, 3}, static_cast<std::int64_t>(ci) * 9, rng));
            p.biases.emplace_back(Shape{co});
        }
        if (arch.batch_norm && layer >= 1 && layer < D - 1) {
            p.bn_scale.push_back(TensorT<T>::full({Wd}, T(1)));
            p.bn_shift.emplace_back(Shape{Wd});
            p.bn_running_mean.emplace_back(Shape{Wd});
            p.bn_running_var.push_back(TensorT<T>::full({Wd}, T(1)));
        }
    }
    return p;
}

// ---- discriminator ------------------------------------------------------

template <typename T>
struct DiscriminatorParamsT {
    std::vector<int> widths;          // the four block widths
    std::vector<TensorT<T>> kernels;  // four stride-2 convs
    std::vector<TensorT<T>> biases;
    TensorT<T> dense_weight;  // [1, widths.back()]
    TensorT<T> dense_bias;    // [1]

    std::vector<TensorT<T>*> trainable() {
        std::vector<TensorT<T>*> out;
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            out.push_back(&kernels[i]);
            out.push_back(&biases[i]);
        }
        out.push_back(&dense_weight);
        out.push_back(&dense_bias);
        return out;
    }

    std::int64_t param_count() const {
        std::int64_t n = dense_weight.size() + dense_bias.size();
        for (const auto& k : kernels) n += k.size();
        for (const auto& b : biases) n += b.size();
        return n;
    }
};

using DiscriminatorParams = DiscriminatorParamsT<double>;

inline std::int64_t discriminator_count_for_widths(const std::vector<int>& w) {
    std::int64_t n = 0;
    int ci = 1;
    for (int co : w) {
        n += static_cast<std::int64_t>(co) * ci * 9 + co;
        ci = co;
    }
    n += w.back() + 1;  // dense head
    return n;
}

// Scale the 32/64/128/256 ladder by the multiplier (from a fixed grid)
// whose parameter count is closest to the generator's in log space. The
// strength-matching contract — within a factor of two — is then asserted.
inline std::vector<int> discriminator_widths_for(std::int64_t gen_param_count) {
    require(gen_param_count > 0, "discriminator: generator parameter count must be positive");
    const int base[4] = {32, 64, 128, 256};
    std::vector<int> best;
    double best_score = 0.0;
    for (int k = 1; k <= 64; ++k) {
        const double m = static_cast<double>(k) / 32.0;
        std::vector<int> w(4);
        for (int i = 0; i < 4; ++i)
            w[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::lround(base[i] * m)));
        const double score = std::abs(std::log(
            static_cast<double>(discriminator_count_for_widths(w)) /
            static_cast<double>(gen_param_count)));
        if (best.empty() || score < best_score) {
            best = w;
            best_score = score;
        }
    }
    const std::int64_t count = discriminator_count_for_widths(best);
    require(count * 2 >= gen_param_count && count <= gen_param_count * 2,
            "discriminator: no width multiplier lands within 2x of " +
                std::to_string(gen_param_count) + " parameters");
    return best;
}

template <typename T>
DiscriminatorParamsT<T> init_discriminator_with_widths(const std::vector<int>& widths,
                                                       std::uint64_t seed) {
    require(widths.size() == 4, "discriminator: expected four block widths");
    DiscriminatorParamsT<T> p;
    p.widths = widths;
    int ci = 1;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const int co = widths[i];
        Rng rng = Rng::stream(seed, stream_key("disc_layer"), static_cast<std::uint64_t>(i));
        p.kernels.push_back(detail::he_uniform<T>({co, ci, 3, 3}, static_cast<std::int64_t>(ci) * 9, rng));
        p.biases.emplace_back(Shape{co});
        ci = co;
    }
    // Zero-initialized head: an untrained discriminator reports exactly 0.5.
    p.dense_weight = TensorT<T>(Shape{1, widths.back()});
    p.dense_bias = TensorT<T>(Shape{1});
    return p;
}

template <typename T>
DiscriminatorParamsT<T> init_discriminator(std::int64_t gen_param_count, std::uint64_t seed) {
    return init_discriminator_with_widths<T>(discriminator_widths_for(gen_param_count), seed);
}

// ---- tape staging and forward passes ------------------------------------

// Parameter tensors copied onto a tape as leaves, in the same order
// trainable() reports them, so gradients can be read back positionally.
template <typename T>
struct StagedGenerator {
    std::vector<NodeId> kernels, biases, bn_scale, bn_shift;
    NodeId log_gamma = -1;
    bool train_mode = true;
    GeneratorParamsT<T>* params = nullptr;  // batch-norm running stats live here
    std::vector<NodeId> trainable;          // [conv/bn leaves...] + log_gamma if learnable
};

template <typename T>
StagedGenerator<T> stage_generator(TapeT<T>& tape, GeneratorParamsT<T>& gen,
                                   const GammaParamT<T>& gamma, bool train_mode = true) {
    StagedGenerator<T> s;
    s.params = &gen;
    s.train_mode = train_mode;
    const std::size_t D = gen.kernels.size();
    for (std::size_t i = 0; i < D; ++i) {
        s.kernels.push_back(tape.leaf(gen.kernels[i], true));
        s.biases.push_back(tape.leaf(gen.biases[i], true));
        s.trainable.push_back(s.kernels.back());
        s.trainable.push_back(s.biases.back());
        if (gen.arch.batch_norm && i >= 1 && i + 1 < D) {
            s.bn_scale.push_back(tape.leaf(gen.bn_scale[i - 1], true));
            s.bn_shift.push_back(tape.leaf(gen.bn_shift[i - 1], true));
            s.trainable.push_back(s.bn_scale.back());
            s.trainable.push_back(s.bn_shift.back());
        }
    }
    s.log_gamma = tape.leaf(TensorT<T>({1}, {gamma.log_gamma}), gamma.learnable);
    if (gamma.learnable) s.trainable.push_back(s.log_gamma);
    return s;
}

template <typename T>
NodeId generator_forward(TapeT<T>& tape, const StagedGenerator<T>& s, NodeId y) {
    const TensorT<T>& yv = tape.value(y);
    require(yv.ndim() == 4, "generator: input must be [N,1,H,W]");
    require(yv.dim(1) == 1, "generator: expected a single input channel, got " +
                                std::to_string(yv.dim(1)));
    const std::size_t D = s.kernels.size();
    NodeId h = tape.relu(tape.conv2d(y, s.kernels[0], s.biases[0], 1, 1));
    for (std::size_t i = 1; i + 1 < D; ++i) {
        NodeId c = tape.conv2d(h, s.kernels[i], s.biases[i], 1, 1);
        if (s.params->arch.batch_norm) {
            c = tape.batch_norm(c, s.bn_scale[i - 1], s.bn_shift[i - 1], s.train_mode,
                                &s.params->bn_running_mean[i - 1], &s.params->bn_running_var[i - 1],
                                T(1e-5));
        }
        h = tape.relu(c);
    }
    NodeId residual = tape.conv2d(h, s.kernels[D - 1], s.biases[D - 1], 1, 1);
    return tape.sub(y, residual);
}

template <typename T>
std::pair<NodeId, NodeId> siamese_forward(TapeT<T>& tape, const StagedGenerator<T>& s, NodeId y1,
                                          NodeId y2) {
    require(tape.value(y1).same_shape(tape.value(y2)),
            "siamese: branch inputs differ in shape: " + shape_to_string(tape.value(y1).shape) +
                " vs " + shape_to_string(tape.value(y2).shape));
    // Both branches read the same parameter leaves; backward therefore
    // accumulates both branches' contributions into the shared gradients.
    NodeId x1 = generator_forward(tape, s, y1);
    NodeId x2 = generator_forward(tape, s, y2);
    return {x1, x2};
}

template <typename T>
struct StagedDiscriminator {
    std::vector<NodeId> kernels, biases;
    NodeId dense_weight = -1, dense_bias = -1;
    std::vector<NodeId> trainable;
};

template <typename T>
StagedDiscriminator<T> stage_discriminator(TapeT<T>& tape, const DiscriminatorParamsT<T>& disc,
                                           bool requires_grad = true) {
    StagedDiscriminator<T> s;
    for (std::size_t i = 0; i < disc.kernels.size(); ++i) {
        s.kernels.push_back(tape.leaf(disc.kernels[i], requires_grad));
        s.biases.push_back(tape.leaf(disc.biases[i], requires_grad));
        s.trainable.push_back(s.kernels.back());
        s.trainable.push_back(s.biases.back());
    }
    s.dense_weight = tape.leaf(disc.dense_weight, requires_grad);
    s.dense_bias = tape.leaf(disc.dense_bias, requires_grad);
    s.trainable.push_back(s.dense_weight);
    s.trainable.push_back(s.dense_bias);
    return s;
}

// delta [N,1,h,w] -> per-sample probability, shape [N,1], strictly in (0,1).
template <typename T>
NodeId discriminator_forward(TapeT<T>& tape, const StagedDiscriminator<T>& s, NodeId delta) {
    const TensorT<T>& dv = tape.value(delta);
    require(dv.ndim() == 4 && dv.dim(1) == 1, "discriminator: input must be [N,1,h,w]");
    NodeId h = delta;
    for (std::size_t i = 0; i < s.kernels.size(); ++i)
        h = tape.leaky_relu(tape.conv2d(h, s.kernels[i], s.biases[i], 2, 1), T(0.2));
    NodeId pooled = tape.global_avg_pool(h);
    NodeId logit = tape.dense(pooled, s.dense_weight, s.dense_bias);
    return tape.sigmoid(logit);
}

// ---- tape-free application (inference and evaluation) -------------------

template <typename T>
TensorT<T> generator_apply(const GeneratorParamsT<T>& gen, const TensorT<T>& y) {
    require(y.ndim() == 4, "generator: input must be [N,1,H,W]");
    require(y.dim(1) == 1, "generator: expected a single input channel");
    const std::size_t D = gen.kernels.size();
    TensorT<T> h = relu_forward(conv2d_forward(y, gen.kernels[0], gen.biases[0], 1, 1));
    for (std::size_t i = 1; i + 1 < D; ++i) {
        TensorT<T> c = conv2d_forward(h, gen.kernels[i], gen.biases[i], 1, 1);
        if (gen.arch.batch_norm) {
            // Inference always uses the stored running statistics.
            auto& rm = const_cast<TensorT<T>&>(gen.bn_running_mean[i - 1]);
            auto& rv = const_cast<TensorT<T>&>(gen.bn_running_var[i - 1]);
            c = batch_norm_forward(c, gen.bn_scale[i - 1], gen.bn_shift[i - 1], false, rm, rv,
                                   T(1e-5));
        }
        h = relu_forward(c);
    }
    TensorT<T> residual = conv2d_forward(h, gen.kernels[D - 1], gen.biases[D - 1], 1, 1);
    TensorT<T> out(y.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = y[i] - residual[i];
    return out;
}

// Returns per-sample probabilities, shape [N].
template <typename T>
TensorT<T> discriminator_apply(const DiscriminatorParamsT<T>& disc, const TensorT<T>& delta) {
    require(delta.ndim() == 4 && delta.dim(1) == 1, "discriminator: input must be [N,1,h,w]");
    TensorT<T> h = delta;
    for (std::size_t i = 0; i < disc.kernels.size(); ++i)
        h = leaky_relu_forward(conv2d_forward(h, disc.kernels[i], disc.biases[i], 2, 1), T(0.2));
    TensorT<T> pooled = global_avg_pool_forward(h);
    TensorT<T> logits = dense_forward(pooled, disc.dense_weight, disc.dense_bias);
    TensorT<T> out({delta.dim(0)});
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(logits[i]);
    return out;
}

}  // namespace tmgan
