#pragma once

// Loss construction: the scaled texture difference (whose anatomy and bias
// components cancel exactly), the binary cross-entropy discriminator loss,
// the bias-reducing output mixing, and the full generator loss.
//
// Gradient discipline: the discriminator loss sees generator outputs only
// as detached constants, and the generator loss stages discriminator
// parameters as frozen leaves. Neither side ever backpropagates into the
// other's weights.

#include <cmath>
#include <type_traits>
#include <utility>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/kernels.hpp"
#include "tmgan/models.hpp"
#include "tmgan/tape.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

// Probabilities are clamped this far away from {0,1} before any log.
inline constexpr double kProbClamp = 1e-7;

struct LossConfig {
    double lambda = 0.4;   // adversarial texture weight
    double sigma_hu = 7.8;  // noise scale in the data-fit term (offset-HU)
    double alpha = 0.5;    // bias-reduction mixing
    // When set, the generator maximizes log(1 - f) instead of minimizing
    // -log f. Off by default: the non-saturating form is the standard
    // reading and trains far better early on.
    bool saturating_adversarial = false;

    void validate() const {
        require(lambda >= 0.0, "loss: lambda must be >= 0");
        require(sigma_hu > 0.0, "loss: sigma must be > 0");
        require(alpha >= 0.5 && alpha <= 1.0, "loss: alpha must lie in [0.5, 1.0]");
    }
};

// One training batch: clean targets and the two corrupted versions, all
// [K,1,p,p].
template <typename T>
struct BatchT {
    TensorT<T> x, y1, y2;

    int size() const { return x.dim(0); }
    void check() const {
        require(x.ndim() == 4 && x.same_shape(y1) && x.same_shape(y2),
                "batch: x, y1, y2 must share one [K,1,p,p] shape");
    }
};

using Batch = BatchT<double>;

// ---- texture difference -------------------------------------------------

// γ(x̂1 - x̂2). Because both branches share the clean image and the bias,
// the subtraction cancels them and only estimation noise remains — the
// discriminator never sees anatomy.
template <typename T>
TensorT<T> texture_difference(const TensorT<T>& x1, const TensorT<T>& x2, T gamma) {
    require(x1.same_shape(x2), "texture_difference: shape mismatch " +
                                   shape_to_string(x1.shape) + " vs " + shape_to_string(x2.shape));
    require(gamma > T(0), "texture_difference: gamma must be positive");
    TensorT<T> out(x1.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = gamma * (x1[i] - x2[i]);
    return out;
}

// Tape version: gamma enters as exp(log_gamma) so its gradient flows to the
// underlying (unconstrained) parameter.
template <typename T>
NodeId texture_difference_node(TapeT<T>& tape, NodeId x1, NodeId x2, NodeId log_gamma) {
    NodeId gamma = tape.exp(log_gamma);
    return tape.mul_scalar_node(tape.sub(x1, x2), gamma);
}

// ---- bias-reducing mixing -----------------------------------------------

template <typename T>
std::pair<TensorT<T>, TensorT<T>> bias_reducing_pair(const TensorT<T>& x1, const TensorT<T>& x2,
                                                     T alpha) {
    require(alpha >= T(0.5) && alpha <= T(1), "bias_reducing_pair: alpha must lie in [0.5, 1.0]");
    require(x1.same_shape(x2), "bias_reducing_pair: shape mismatch");
    TensorT<T> z1(x1.shape), z2(x1.shape);
    for (std::int64_t i = 0; i < x1.size(); ++i) {
        z1[i] = alpha * x1[i] + (T(1) - alpha) * x2[i];
        z2[i] = (T(1) - alpha) * x1[i] + alpha * x2[i];
    }
    return {std::move(z1), std::move(z2)};
}

template <typename T>
std::pair<NodeId, NodeId> bias_reducing_pair_node(TapeT<T>& tape, NodeId x1, NodeId x2, T alpha) {
    require(alpha >= T(0.5) && alpha <= T(1), "bias_reducing_pair: alpha must lie in [0.5, 1.0]");
    return {tape.axpby(alpha, x1, T(1) - alpha, x2), tape.axpby(T(1) - alpha, x1, alpha, x2)};
}

// ---- discriminator loss (binary cross-entropy) ------------------------------------------

// Plain-arithmetic binary cross-entropy over probability lists; the hand-computable oracle
// the tensor path is tested against.
inline double bice_from_probs(const std::vector<double>& real_p, const std::vector<double>& fake_p) {
    require(!real_p.empty() && real_p.size() == fake_p.size(),
            "bice: real/fake batches must be non-empty and equal-sized");
    double acc = 0.0;
    for (std::size_t i = 0; i < real_p.size(); ++i) {
        const double pr = std::min(std::max(real_p[i], kProbClamp), 1.0 - kProbClamp);
        const double pf = std::min(std::max(fake_p[i], kProbClamp), 1.0 - kProbClamp);
        acc += std::log(pr) + std::log(1.0 - pf);
    }
    return -acc / static_cast<double>(real_p.size());
}

// Tape builder. `real` holds target-texture differences (t1 - t2), `fake`
// the scaled generator differences; both [K,1,h,w]. Stage `fake` as a
// detached leaf — gradients reach θ_d only.
template <typename T>
NodeId discriminator_loss_node(TapeT<T>& tape, const StagedDiscriminator<T>& disc, NodeId real,
                               NodeId fake) {
    require(tape.value(real).dim(0) > 0 && tape.value(fake).dim(0) > 0,
            "discriminator_loss: empty batch");
    const T K = static_cast<T>(tape.value(real).dim(0));
    NodeId p_real = tape.clamp(discriminator_forward(tape, disc, real), T(kProbClamp),
                               T(1) - T(kProbClamp));
    NodeId p_fake = tape.clamp(discriminator_forward(tape, disc, fake), T(kProbClamp),
                               T(1) - T(kProbClamp));
    NodeId log_real = tape.sum(tape.log(p_real));
    NodeId log_not_fake = tape.sum(tape.log(tape.affine(p_fake, T(-1), T(1))));
    return tape.affine(tape.add(log_real, log_not_fake), T(-1) / K, T(0));
}

// Value-level wrapper: evaluates the binary cross-entropy loss of a discriminator on
// already-built difference batches.
template <typename T>
T discriminator_loss(const TensorT<T>& real_diffs, const TensorT<T>& fake_diffs,
                     const DiscriminatorParamsT<T>& disc) {
    TapeT<T> tape;
    StagedDiscriminator<T> staged = stage_discriminator(tape, disc, false);
    NodeId loss = discriminator_loss_node(tape, staged, tape.leaf(real_diffs), tape.leaf(fake_diffs));
    return tape.value(loss)[0];
}

// ---- generator loss -----------------------------------------------------

// Pure-arithmetic oracle for hand-checked cases: takes the generator
// outputs and the discriminator probabilities on the scaled differences as
// given numbers.
inline double generator_loss_from_outputs(const Tensor& x, const Tensor& x1, const Tensor& x2,
                                          const std::vector<double>& f_probs,
                                          const LossConfig& cfg) {
    cfg.validate();
    const int K = x.dim(0);
    const std::int64_t per = x.size() / K;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        if (cfg.lambda > 0.0) {
            const double p =
                std::min(std::max(f_probs[static_cast<std::size_t>(k)], kProbClamp), 1.0 - kProbClamp);
            acc += cfg.saturating_adversarial ? cfg.lambda * std::log(1.0 - p)
                                              : -cfg.lambda * std::log(p);
        }
        double d = 0.0;
        for (std::int64_t i = 0; i < per; ++i) {
            const std::int64_t j = k * per + i;
            const double z1 = cfg.alpha * x1[j] + (1.0 - cfg.alpha) * x2[j];
            const double z2 = (1.0 - cfg.alpha) * x1[j] + cfg.alpha * x2[j];
            d += (z1 - x[j]) * (z1 - x[j]) + (z2 - x[j]) * (z2 - x[j]);
        }
        acc += d / (2.0 * cfg.sigma_hu * cfg.sigma_hu);
    }
    return acc / K;
}

// Full tape builder. Stages nothing itself: the caller provides the staged
// generator (trainable) and — when λ > 0 — a discriminator staged as
// frozen leaves. Returns the scalar loss node; generator outputs and the
// scaled difference are also reported for reuse.
template <typename T>
struct GeneratorLossNodes {
    NodeId loss = -1;
    NodeId x1 = -1, x2 = -1;
    NodeId scaled_diff = -1;  // -1 when lambda == 0
};

template <typename T>
GeneratorLossNodes<T> generator_loss_node(TapeT<T>& tape, const StagedGenerator<T>& gen,
                                          const StagedDiscriminator<std::type_identity_t<T>>* disc,
                                          NodeId x, NodeId y1, NodeId y2, const LossConfig& cfg) {
    cfg.validate();
    require(cfg.lambda == 0.0 || disc != nullptr,
            "generator_loss: lambda > 0 requires a discriminator");
    const T K = static_cast<T>(tape.value(x).dim(0));

    GeneratorLossNodes<T> out;
    auto [x1, x2] = siamese_forward(tape, gen, y1, y2);
    out.x1 = x1;
    out.x2 = x2;

    // Data-fit term on the bias-reduced pair.
    auto [z1, z2] = bias_reducing_pair_node(tape, x1, x2, static_cast<T>(cfg.alpha));
    NodeId fit = tape.add(tape.sum_squares(tape.sub(z1, x)), tape.sum_squares(tape.sub(z2, x)));
    const T fit_scale = T(1) / (T(2) * static_cast<T>(cfg.sigma_hu) * static_cast<T>(cfg.sigma_hu) * K);
    NodeId total = tape.affine(fit, fit_scale, T(0));

    if (cfg.lambda > 0.0) {
        NodeId diff = texture_difference_node(tape, x1, x2, gen.log_gamma);
        out.scaled_diff = diff;
        NodeId p = tape.clamp(discriminator_forward(tape, *disc, diff), T(kProbClamp),
                              T(1) - T(kProbClamp));
        NodeId adv;
        if (cfg.saturating_adversarial) {
            // Original minimax form: minimize log(1 - f).
            adv = tape.affine(tape.sum(tape.log(tape.affine(p, T(-1), T(1)))),
                              static_cast<T>(cfg.lambda) / K, T(0));
        } else {
            adv = tape.affine(tape.sum(tape.log(p)), -static_cast<T>(cfg.lambda) / K, T(0));
        }
        total = tape.add(total, adv);
    }
    out.loss = total;
    return out;
}

// Value-level wrapper over one batch. The discriminator pointer is a
// non-deduced context so callers can pass a plain nullptr.
template <typename T>
T generator_loss(const BatchT<T>& batch, GeneratorParamsT<T>& gen, const GammaParamT<T>& gamma,
                 const DiscriminatorParamsT<std::type_identity_t<T>>* disc, const LossConfig& cfg) {
    batch.check();
    TapeT<T> tape;
    StagedGenerator<T> sg = stage_generator(tape, gen, gamma, /*train_mode=*/true);
    StagedDiscriminator<T> sd;
    if (disc) sd = stage_discriminator(tape, *disc, false);
    GeneratorLossNodes<T> nodes =
        generator_loss_node(tape, sg, disc ? &sd : nullptr, tape.leaf(batch.x),
                            tape.leaf(batch.y1), tape.leaf(batch.y2), cfg);
    return tape.value(nodes.loss)[0];
}

}  // namespace tmgan
