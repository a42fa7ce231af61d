#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tmgan/adam.hpp"
#include "tmgan/common.hpp"
#include "tmgan/losses.hpp"
#include "tmgan/models.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

enum class Precision { train32, test64 };

inline std::string precision_name(Precision p) {
    return p == Precision::train32 ? "train32" : "test64";
}

inline Precision precision_from_name(const std::string& name) {
    if (name == "train32") return Precision::train32;
    if (name == "test64") return Precision::test64;
    throw Error("precision: expected train32 or test64, got '" + name + "'");
}

// Everything the training loop needs beyond the models themselves. The
// target texture spec supplies the discriminator's real samples: each batch
// element gets an independently drawn texture pair, differenced.
struct TrainConfig {
    LossConfig loss;
    double eta = 0.3;          // blending weight, consumed downstream
    double threshold_d = 0.2;  // discriminator update gate
    int max_disc_updates = 1;  // inner-loop cap per generator update
    int total_updates = 2000;  // generator updates to run
    double lr_gen = 3e-5;
    double lr_disc = 3e-6;
    int batch_size = 32;
    std::uint64_t seed = 0;
    Precision precision = Precision::test64;
    TextureSpec target;

    void validate() const {
        loss.validate();
        target.validate();
        require(eta >= 0.0 && eta <= 1.0, "train config: eta must lie in [0, 1]");
        require(threshold_d > 0.0, "train config: discriminator threshold must be positive");
        require(max_disc_updates >= 1, "train config: discriminator update cap must be at least 1");
        require(total_updates >= 1, "train config: total update count must be positive");
        require(lr_gen > 0.0 && lr_disc > 0.0, "train config: learning rates must be positive");
        require(batch_size >= 1, "train config: batch size must be positive");
    }
};

struct TrainRecord {
    std::int64_t step = 0;
    double gen_loss = 0.0;
    double disc_loss = 0.0;  // last evaluated gate value; 0 when the gate never ran
    int n_d = 0;             // discriminator updates taken this step
    double gamma = 1.0;      // value after the generator update
    double seconds = 0.0;    // wall time of the whole outer iteration
};

struct TrainingLog {
    static constexpr const char* kCsvHeader = "step,gen_loss,disc_loss,n_d,gamma,seconds";

    std::vector<TrainRecord> records;

    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

// Raised when a loss turns non-finite; carries everything logged up to the
// failing step so the run can be inspected.
struct TrainAbort : Error {
    TrainingLog log;
    std::int64_t failed_step = 0;

    TrainAbort(const std::string& msg, TrainingLog partial, std::int64_t step)
        : Error(msg), log(std::move(partial)), failed_step(step) {}
};

// Test seam: when a hook is set, it replaces the corresponding loss
// evaluation and no parameters move, but the schedule bookkeeping (gates,
// counters, log) runs exactly as in a real run.
struct TrainHooks {
    std::function<double(std::int64_t step, int inner)> disc_loss;
    std::function<double(std::int64_t step)> gen_loss;
};

// Full mutable training state: models, the Adam moments, and the step
// counter. log_gamma_param mirrors gamma.log_gamma as a 1-element tensor so
// the shared Adam machinery can update it positionally.
template <typename T>
struct TrainStateT {
    GeneratorParamsT<T> gen;
    GammaParamT<T> gamma;
    DiscriminatorParamsT<T> disc;
    TensorT<T> log_gamma_param{Shape{1}};
    AdamStateT<T> adam_gen, adam_disc;
    std::int64_t completed_steps = 0;
};

using TrainState = TrainStateT<double>;

namespace detail {

template <typename T>
std::vector<TensorT<T>*> gen_param_ptrs(TrainStateT<T>& state) {
    std::vector<TensorT<T>*> out = state.gen.trainable();
    if (state.gamma.learnable) out.push_back(&state.log_gamma_param);
    return out;
}

}  // namespace detail

template <typename T>
TrainStateT<T> make_train_state(GeneratorParamsT<T> gen, GammaParamT<T> gamma,
                                DiscriminatorParamsT<T> disc) {
    TrainStateT<T> s;
    s.gen = std::move(gen);
    s.gamma = gamma;
    s.disc = std::move(disc);
    s.log_gamma_param[0] = s.gamma.log_gamma;
    s.adam_gen = AdamStateT<T>::for_params(detail::gen_param_ptrs(s));
    s.adam_disc = AdamStateT<T>::for_params(s.disc.trainable());
    return s;
}

// Fresh models from one master seed: generator and discriminator draw from
// disjoint derived streams, the discriminator sized to parameter parity.
template <typename T>
TrainStateT<T> init_train_state(const GeneratorArch& arch, std::uint64_t seed,
                                GammaParamT<T> gamma = GammaParamT<T>{}) {
    GeneratorParamsT<T> gen =
        init_generator<T>(arch, Rng::stream(seed, stream_key("gen_init")).next_u64());
    DiscriminatorParamsT<T> disc = init_discriminator<T>(
        gen.param_count(), Rng::stream(seed, stream_key("disc_init")).next_u64());
    return make_train_state(std::move(gen), gamma, std::move(disc));
}

namespace detail {

template <typename T>
BatchT<T> assemble_batch(const std::vector<PatchPair>& set, const std::vector<std::int64_t>& order,
                         std::int64_t first, int batch_size) {
    const Tensor& proto = set[static_cast<std::size_t>(order[static_cast<std::size_t>(first)])].x;
    const std::int64_t p = proto.dim(1);
    BatchT<T> b;
    b.x = TensorT<T>({batch_size, 1, p, p});
    b.y1 = TensorT<T>({batch_size, 1, p, p});
    b.y2 = TensorT<T>({batch_size, 1, p, p});
    const std::int64_t per = p * p;
    for (int k = 0; k < batch_size; ++k) {
        const PatchPair& pair =
            set[static_cast<std::size_t>(order[static_cast<std::size_t>(first + k)])];
        require(pair.x.same_shape(proto) && pair.y1.same_shape(proto) && pair.y2.same_shape(proto),
                "train: patches must share one shape");
        for (std::int64_t i = 0; i < per; ++i) {
            b.x[k * per + i] = static_cast<T>(pair.x[i]);
            b.y1[k * per + i] = static_cast<T>(pair.y1[i]);
            b.y2[k * per + i] = static_cast<T>(pair.y2[i]);
        }
    }
    return b;
}

// Real discriminator samples for one step: per batch element, the
// difference of two fresh target-texture draws. Draws are keyed by the
// absolute step so a resumed run replays them exactly; sampling runs in
// double (the data pipeline's precision) and the difference is then cast.
template <typename T>
TensorT<T> target_difference_batch(const TextureSpec& target, std::int64_t step, int batch_size,
                                   std::int64_t p) {
    TensorT<T> out({batch_size, 1, p, p});
    const std::int64_t per = p * p;
    for (int k = 0; k < batch_size; ++k) {
        const Tensor t1 = sample_texture_stream(
            target, p, p,
            Rng::stream(target.seed, stream_key("target_pair"), static_cast<std::uint64_t>(step),
                        static_cast<std::uint64_t>(2 * k)));
        const Tensor t2 = sample_texture_stream(
            target, p, p,
            Rng::stream(target.seed, stream_key("target_pair"), static_cast<std::uint64_t>(step),
                        static_cast<std::uint64_t>(2 * k + 1)));
        for (std::int64_t i = 0; i < per; ++i)
            out[k * per + i] = static_cast<T>(t1[i] - t2[i]);
    }
    return out;
}

inline std::vector<std::int64_t> epoch_order(std::size_t n, std::uint64_t seed,
                                             std::int64_t epoch) {
    std::vector<std::int64_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::int64_t>(i);
    Rng rng = Rng::stream(seed, stream_key("batch_shuffle"), static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace detail

// The alternating schedule. Per generator update: re-evaluate the
// discriminator loss on the current mini-batch and take an Adam step on it
// while the loss exceeds threshold_d, up to max_disc_updates times; then
// one Adam step on the generator (conv stack plus gamma). Runs from
// state.completed_steps to total_updates and returns the records for the
// steps run in this call. The validation set is accepted for signature
// parity; evaluation is the caller's concern (see validation_mse).
template <typename T>
TrainingLog train(const TrainConfig& cfg, const std::vector<PatchPair>& train_set,
                  const std::vector<PatchPair>& val_set, TrainStateT<T>& state,
                  const TrainHooks* hooks = nullptr) {
    cfg.validate();
    (void)val_set;
    require(!train_set.empty(), "train: training set is empty");
    require(static_cast<std::size_t>(cfg.batch_size) <= train_set.size(),
            "train: batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                std::to_string(train_set.size()) + "-pair training set");
    require(state.completed_steps <= cfg.total_updates,
            "train: state is already past the requested update count");

    const bool hook_disc = hooks != nullptr && hooks->disc_loss != nullptr;
    const bool hook_gen = hooks != nullptr && hooks->gen_loss != nullptr;
    const std::int64_t batches_per_epoch =
        static_cast<std::int64_t>(train_set.size()) / cfg.batch_size;

    TrainingLog log;
    std::vector<std::int64_t> order;
    std::int64_t cached_epoch = -1;

    auto abort_if = [&](bool bad, const char* what, std::int64_t step) {
        if (bad)
            throw TrainAbort(std::string("train: non-finite ") + what + " at step " +
                                 std::to_string(step),
                             log, step);
    };

    for (std::int64_t step = state.completed_steps; step < cfg.total_updates; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::int64_t epoch = step / batches_per_epoch;
        if (epoch != cached_epoch) {
            order = detail::epoch_order(train_set.size(), cfg.seed, epoch);
            cached_epoch = epoch;
        }
        const std::int64_t slot = (step % batches_per_epoch) * cfg.batch_size;
        const BatchT<T> batch = detail::assemble_batch<T>(train_set, order, slot, cfg.batch_size);
        const std::int64_t p = batch.x.dim(2);

        // --- discriminator phase -----------------------------------------
        int n_d = 0;
        double disc_val = 0.0;
        if (hook_disc || cfg.loss.lambda > 0.0) {
            TensorT<T> real, fake;
            if (!hook_disc) {
                real = detail::target_difference_batch<T>(cfg.target, step, cfg.batch_size, p);
                // The generator is frozen during the inner loop, so its
                // outputs are computed once, in inference mode.
                const TensorT<T> x1 = generator_apply(state.gen, batch.y1);
                const TensorT<T> x2 = generator_apply(state.gen, batch.y2);
                fake = texture_difference(x1, x2, state.gamma.gamma());
            }
            while (n_d < cfg.max_disc_updates) {
                if (hook_disc) {
                    const double d = hooks->disc_loss(step, n_d);
                    abort_if(!std::isfinite(d), "discriminator loss", step);
                    disc_val = d;
                    if (!(d > cfg.threshold_d)) break;
                    ++n_d;  // counted update; the stub has no parameters to move
                    continue;
                }
                TapeT<T> tape;
                StagedDiscriminator<T> sd = stage_discriminator(tape, state.disc, true);
                const NodeId loss =
                    discriminator_loss_node(tape, sd, tape.leaf(real), tape.leaf(fake));
                const double d = static_cast<double>(tape.value(loss)[0]);
                abort_if(!std::isfinite(d), "discriminator loss", step);
                disc_val = d;
                if (!(d > cfg.threshold_d)) break;
                tape.backward(loss);
                std::vector<const TensorT<T>*> grads;
                for (NodeId node : sd.trainable) grads.push_back(&tape.grad(node));
                adam_step(state.disc.trainable(), grads, state.adam_disc,
                          static_cast<T>(cfg.lr_disc));
                ++n_d;
            }
        }

        // --- generator phase ---------------------------------------------
        double g_val = 0.0;
        if (hook_gen) {
            g_val = hooks->gen_loss(step);
            abort_if(!std::isfinite(g_val), "generator loss", step);
        } else {
            TapeT<T> tape;
            StagedGenerator<T> sg = stage_generator(tape, state.gen, state.gamma, true);
            StagedDiscriminator<T> sd;
            const bool with_disc = cfg.loss.lambda > 0.0;
            if (with_disc) sd = stage_discriminator(tape, state.disc, false);
            const GeneratorLossNodes<T> nodes =
                generator_loss_node(tape, sg, with_disc ? &sd : nullptr, tape.leaf(batch.x),
                                    tape.leaf(batch.y1), tape.leaf(batch.y2), cfg.loss);
            g_val = static_cast<double>(tape.value(nodes.loss)[0]);
            abort_if(!std::isfinite(g_val), "generator loss", step);
            tape.backward(nodes.loss);
            const std::vector<TensorT<T>*> params = detail::gen_param_ptrs(state);
            std::vector<const TensorT<T>*> grads;
            for (NodeId node : sg.trainable) grads.push_back(&tape.grad(node));
            require(grads.size() == params.size(), "train: staged/stored parameter list mismatch");
            adam_step(params, grads, state.adam_gen, static_cast<T>(cfg.lr_gen));
            state.gamma.log_gamma = state.log_gamma_param[0];
        }

        const double seconds = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        log.records.push_back({step, g_val, disc_val, n_d,
                               static_cast<double>(state.gamma.gamma()), seconds});
        state.completed_steps = step + 1;
    }
    return log;
}

// Mean squared per-pixel error of the enhanced noisy fields against the
// clean patch, over both fields of every pair.
template <typename T>
double validation_mse(const GeneratorParamsT<T>& gen, const std::vector<PatchPair>& set) {
    require(!set.empty(), "validation_mse: empty set");
    const std::int64_t p = set[0].x.dim(1);
    const std::int64_t n = static_cast<std::int64_t>(set.size());
    TensorT<T> y({2 * n, 1, p, p});
    const std::int64_t per = p * p;
    for (std::int64_t k = 0; k < n; ++k) {
        const PatchPair& pair = set[static_cast<std::size_t>(k)];
        require(pair.x.dim(1) == p && pair.x.dim(2) == p, "validation_mse: mixed patch sizes");
        for (std::int64_t i = 0; i < per; ++i) {
            y[(2 * k) * per + i] = static_cast<T>(pair.y1[i]);
            y[(2 * k + 1) * per + i] = static_cast<T>(pair.y2[i]);
        }
    }
    const TensorT<T> xhat = generator_apply(gen, y);
    std::vector<double> sq(static_cast<std::size_t>(xhat.size()));
    for (std::int64_t k = 0; k < n; ++k)
        for (std::int64_t i = 0; i < per; ++i) {
            const double x = set[static_cast<std::size_t>(k)].x[i];
            const double e1 = static_cast<double>(xhat[(2 * k) * per + i]) - x;
            const double e2 = static_cast<double>(xhat[(2 * k + 1) * per + i]) - x;
            sq[static_cast<std::size_t>((2 * k) * per + i)] = e1 * e1;
            sq[static_cast<std::size_t>((2 * k + 1) * per + i)] = e2 * e2;
        }
    return pairwise_sum(sq.data(), static_cast<std::int64_t>(sq.size())) /
           static_cast<double>(sq.size());
}

// The no-op enhancer's score on the same data: how far the noisy fields
// already are from the clean patch.
inline double identity_mse(const std::vector<PatchPair>& set) {
    require(!set.empty(), "identity_mse: empty set");
    std::vector<double> sq;
    for (const PatchPair& pair : set)
        for (std::int64_t i = 0; i < pair.x.size(); ++i) {
            const double e1 = pair.y1[i] - pair.x[i];
            const double e2 = pair.y2[i] - pair.x[i];
            sq.push_back(e1 * e1);
            sq.push_back(e2 * e2);
        }
    return pairwise_sum(sq.data(), static_cast<std::int64_t>(sq.size())) /
           static_cast<double>(sq.size());
}

// ---- CSV ----------------------------------------------------------------

inline std::string TrainingLog::to_csv() const {
    std::string out = kCsvHeader;
    out += '\n';
    for (const TrainRecord& r : records) {
        out += format_number(r.step);
        out += ',';
        out += format_number(r.gen_loss);
        out += ',';
        out += format_number(r.disc_loss);
        out += ',';
        out += format_number(static_cast<std::int64_t>(r.n_d));
        out += ',';
        out += format_number(r.gamma);
        out += ',';
        out += format_number(r.seconds);
        out += '\n';
    }
    return out;
}

inline void TrainingLog::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "training log: cannot open '" + path + "' for writing");
    const std::string text = to_csv();
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    require(f.good(), "training log: write to '" + path + "' failed");
}

// ---- checkpoints ---------------------------------------------------------
//
// Layout (version 1, little-endian):
//   "TMGN" | u32 version | u8 dtype (sizeof element) |
//   u64-length-prefixed config text (key=value lines) |
//   target taps tensor (f64) | disc widths (u32 count + i32 each) |
//   u64 completed_steps |
//   generator tensors in declaration order | log_gamma [1] |
//   discriminator tensors in declaration order |
//   adam_gen (u64 step + moment tensors) | adam_disc likewise |
//   u64 FNV-1a checksum of everything above.
// Every tensor is u32 ndim + i64 dims + u64 count + raw element bits.

namespace detail {

constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint64_t fnv1a(const std::string& bytes, std::size_t n) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(bytes[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

struct ByteWriter {
    std::string out;

    void u8(std::uint8_t v) { out.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void scalar(double v) { f64(v); }
    void scalar(float v) { f32(v); }

    template <typename T>
    void tensor(const TensorT<T>& t) {
        u32(static_cast<std::uint32_t>(t.ndim()));
        for (int d = 0; d < t.ndim(); ++d) i64(t.dim(d));
        u64(static_cast<std::uint64_t>(t.size()));
        for (std::int64_t i = 0; i < t.size(); ++i) scalar(t[i]);
    }

    void text(const std::string& s) {
        u64(s.size());
        out += s;
    }
};

struct ByteReader {
    const std::string& in;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        require(pos + n <= in.size(), "checkpoint: truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }

    void scalar(double& v) { v = f64(); }
    void scalar(float& v) { v = f32(); }

    template <typename T>
    TensorT<T> tensor() {
        const std::uint32_t nd = u32();
        require(nd >= 1 && nd <= 8, "checkpoint: implausible tensor rank");
        Shape shape(nd);
        for (std::uint32_t d = 0; d < nd; ++d) {
            shape[d] = i64();
            require(shape[d] >= 1, "checkpoint: non-positive tensor dimension");
        }
        const std::uint64_t count = u64();
        TensorT<T> t(shape);
        require(count == static_cast<std::uint64_t>(t.size()),
                "checkpoint: tensor length prefix disagrees with its shape");
        for (std::int64_t i = 0; i < t.size(); ++i) scalar(t[i]);
        return t;
    }

    std::string text() {
        const std::uint64_t n = u64();
        need(n);
        std::string s = in.substr(pos, n);
        pos += n;
        return s;
    }
};

inline void put_kv(std::string& out, const std::string& key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
}

inline std::string render_config_text(const TrainConfig& cfg, const GeneratorArch& arch,
                                      bool gamma_learnable) {
    std::string t;
    put_kv(t, "lambda", format_number(cfg.loss.lambda));
    put_kv(t, "sigma_hu", format_number(cfg.loss.sigma_hu));
    put_kv(t, "alpha", format_number(cfg.loss.alpha));
    put_kv(t, "saturating_adversarial", cfg.loss.saturating_adversarial ? "1" : "0");
    put_kv(t, "eta", format_number(cfg.eta));
    put_kv(t, "threshold_d", format_number(cfg.threshold_d));
    put_kv(t, "max_disc_updates", format_number(static_cast<std::int64_t>(cfg.max_disc_updates)));
    put_kv(t, "total_updates", format_number(static_cast<std::int64_t>(cfg.total_updates)));
    put_kv(t, "lr_gen", format_number(cfg.lr_gen));
    put_kv(t, "lr_disc", format_number(cfg.lr_disc));
    put_kv(t, "batch_size", format_number(static_cast<std::int64_t>(cfg.batch_size)));
    put_kv(t, "seed", std::to_string(cfg.seed));
    put_kv(t, "precision", precision_name(cfg.precision));
    put_kv(t, "target_base_std", format_number(cfg.target.base_std_hu));
    put_kv(t, "target_seed", std::to_string(cfg.target.seed));
    put_kv(t, "arch_depth", format_number(static_cast<std::int64_t>(arch.depth)));
    put_kv(t, "arch_width", format_number(static_cast<std::int64_t>(arch.width)));
    put_kv(t, "arch_batch_norm", arch.batch_norm ? "1" : "0");
    put_kv(t, "gamma_learnable", gamma_learnable ? "1" : "0");
    return t;
}

inline double parse_double(const std::string& v, const std::string& key) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
            "checkpoint: bad numeric value for key '" + key + "'");
    return out;
}

inline std::int64_t parse_int(const std::string& v, const std::string& key) {
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
            "checkpoint: bad integer value for key '" + key + "'");
    return out;
}

inline std::uint64_t parse_uint(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
            "checkpoint: bad unsigned value for key '" + key + "'");
    return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    require(v == "0" || v == "1", "checkpoint: bad boolean value for key '" + key + "'");
    return v == "1";
}

struct ParsedConfigText {
    TrainConfig cfg;
    GeneratorArch arch;
    bool gamma_learnable = true;
};

inline ParsedConfigText parse_config_text(const std::string& text) {
    ParsedConfigText out;
    std::size_t start = 0, seen = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        require(eq != std::string::npos, "checkpoint: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        ++seen;
        if (key == "lambda") out.cfg.loss.lambda = parse_double(value, key);
        else if (key == "sigma_hu") out.cfg.loss.sigma_hu = parse_double(value, key);
        else if (key == "alpha") out.cfg.loss.alpha = parse_double(value, key);
        else if (key == "saturating_adversarial")
            out.cfg.loss.saturating_adversarial = parse_bool(value, key);
        else if (key == "eta") out.cfg.eta = parse_double(value, key);
        else if (key == "threshold_d") out.cfg.threshold_d = parse_double(value, key);
        else if (key == "max_disc_updates")
            out.cfg.max_disc_updates = static_cast<int>(parse_int(value, key));
        else if (key == "total_updates")
            out.cfg.total_updates = static_cast<int>(parse_int(value, key));
        else if (key == "lr_gen") out.cfg.lr_gen = parse_double(value, key);
        else if (key == "lr_disc") out.cfg.lr_disc = parse_double(value, key);
        else if (key == "batch_size") out.cfg.batch_size = static_cast<int>(parse_int(value, key));
        else if (key == "seed") out.cfg.seed = parse_uint(value, key);
        else if (key == "precision") out.cfg.precision = precision_from_name(value);
        else if (key == "target_base_std") out.cfg.target.base_std_hu = parse_double(value, key);
        else if (key == "target_seed") out.cfg.target.seed = parse_uint(value, key);
        else if (key == "arch_depth") out.arch.depth = static_cast<int>(parse_int(value, key));
        else if (key == "arch_width") out.arch.width = static_cast<int>(parse_int(value, key));
        else if (key == "arch_batch_norm") out.arch.batch_norm = parse_bool(value, key);
        else if (key == "gamma_learnable") out.gamma_learnable = parse_bool(value, key);
        else throw Error("checkpoint: unknown config key '" + key + "'");
    }
    require(seen == 19, "checkpoint: config block has " + std::to_string(seen) +
                            " keys, expected 19");
    return out;
}

template <typename T>
void write_adam(ByteWriter& w, const AdamStateT<T>& adam) {
    w.u64(static_cast<std::uint64_t>(adam.step));
    w.u32(static_cast<std::uint32_t>(adam.first_moment.size()));
    for (const auto& m : adam.first_moment) w.tensor(m);
    for (const auto& v : adam.second_moment) w.tensor(v);
}

template <typename T>
AdamStateT<T> read_adam(ByteReader& r) {
    AdamStateT<T> adam;
    adam.step = static_cast<std::int64_t>(r.u64());
    const std::uint32_t n = r.u32();
    require(n <= 1u << 20, "checkpoint: implausible optimizer tensor count");
    for (std::uint32_t i = 0; i < n; ++i) adam.first_moment.push_back(r.template tensor<T>());
    for (std::uint32_t i = 0; i < n; ++i) adam.second_moment.push_back(r.template tensor<T>());
    return adam;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const TrainStateT<T>& state, const TrainConfig& cfg,
                     const std::string& path) {
    detail::ByteWriter w;
    w.out += "TMGN";
    w.u32(detail::kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(sizeof(T)));
    w.text(detail::render_config_text(cfg, state.gen.arch, state.gamma.learnable));
    w.tensor(cfg.target.taps);
    w.u32(static_cast<std::uint32_t>(state.disc.widths.size()));
    for (int width : state.disc.widths) w.i32(width);
    w.u64(static_cast<std::uint64_t>(state.completed_steps));

    for (const auto& k : state.gen.kernels) w.tensor(k);
    for (const auto& b : state.gen.biases) w.tensor(b);
    for (const auto& s : state.gen.bn_scale) w.tensor(s);
    for (const auto& s : state.gen.bn_shift) w.tensor(s);
    for (const auto& m : state.gen.bn_running_mean) w.tensor(m);
    for (const auto& v : state.gen.bn_running_var) w.tensor(v);
    w.tensor(state.log_gamma_param);
    for (const auto& k : state.disc.kernels) w.tensor(k);
    for (const auto& b : state.disc.biases) w.tensor(b);
    w.tensor(state.disc.dense_weight);
    w.tensor(state.disc.dense_bias);
    detail::write_adam(w, state.adam_gen);
    detail::write_adam(w, state.adam_disc);
    w.u64(detail::fnv1a(w.out, w.out.size()));

    const std::filesystem::path target(path);
    const std::filesystem::path tmp(path + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "checkpoint: cannot open '" + tmp.string() + "' for writing");
        f.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
        require(f.good(), "checkpoint: write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, target);
}

template <typename T>
struct CheckpointT {
    TrainConfig config;
    TrainStateT<T> state;
};

// Reads the stored element width without loading the file body, so callers
// can dispatch to the right precision.
inline int checkpoint_element_size(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "checkpoint: cannot open '" + path + "'");
    char head[9];
    f.read(head, 9);
    require(f.gcount() == 9, "checkpoint: truncated file");
    require(std::string(head, 4) == "TMGN", "checkpoint: bad magic bytes");
    return static_cast<unsigned char>(head[8]);
}

template <typename T>
CheckpointT<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "checkpoint: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    require(bytes.size() >= 4 + 4 + 1 + 8, "checkpoint: truncated file");
    require(bytes.compare(0, 4, "TMGN") == 0, "checkpoint: bad magic bytes");

    detail::ByteReader r{bytes, 4};
    const std::uint32_t version = r.u32();
    require(version == detail::kCheckpointVersion,
            "checkpoint: unsupported format version " + std::to_string(version));
    const std::uint8_t dtype = r.u8();
    require(dtype == sizeof(T), "checkpoint: stored element width " + std::to_string(dtype) +
                                    " does not match the requested precision");

    // Verify integrity before trusting any of the body.
    detail::ByteReader tail{bytes, bytes.size() - 8};
    const std::uint64_t recorded = tail.u64();
    const std::uint64_t actual = detail::fnv1a(bytes, bytes.size() - 8);
    require(recorded == actual, "checkpoint: checksum mismatch, refusing a corrupted file");

    CheckpointT<T> out;
    const detail::ParsedConfigText parsed = detail::parse_config_text(r.text());
    out.config = parsed.cfg;
    out.config.target.taps = r.template tensor<double>();
    out.config.validate();

    const std::uint32_t n_widths = r.u32();
    require(n_widths >= 1 && n_widths <= 64, "checkpoint: implausible discriminator depth");
    std::vector<int> widths;
    for (std::uint32_t i = 0; i < n_widths; ++i)
        widths.push_back(static_cast<int>(r.i32()));

    TrainStateT<T>& s = out.state;
    s.completed_steps = static_cast<std::int64_t>(r.u64());
    parsed.arch.validate();
    s.gen.arch = parsed.arch;
    const int depth = parsed.arch.depth;
    for (int i = 0; i < depth; ++i) s.gen.kernels.push_back(r.template tensor<T>());
    for (int i = 0; i < depth; ++i) s.gen.biases.push_back(r.template tensor<T>());
    if (parsed.arch.batch_norm) {
        for (int i = 0; i < depth - 2; ++i) s.gen.bn_scale.push_back(r.template tensor<T>());
        for (int i = 0; i < depth - 2; ++i) s.gen.bn_shift.push_back(r.template tensor<T>());
        for (int i = 0; i < depth - 2; ++i)
            s.gen.bn_running_mean.push_back(r.template tensor<T>());
        for (int i = 0; i < depth - 2; ++i)
            s.gen.bn_running_var.push_back(r.template tensor<T>());
    }
    s.log_gamma_param = r.template tensor<T>();
    require(s.log_gamma_param.size() == 1, "checkpoint: gamma block must hold one value");
    s.gamma.learnable = parsed.gamma_learnable;
    s.gamma.log_gamma = s.log_gamma_param[0];
    s.disc.widths = widths;
    for (std::uint32_t i = 0; i < n_widths; ++i) s.disc.kernels.push_back(r.template tensor<T>());
    for (std::uint32_t i = 0; i < n_widths; ++i) s.disc.biases.push_back(r.template tensor<T>());
    s.disc.dense_weight = r.template tensor<T>();
    s.disc.dense_bias = r.template tensor<T>();
    s.adam_gen = detail::read_adam<T>(r);
    s.adam_disc = detail::read_adam<T>(r);
    require(r.pos == bytes.size() - 8, "checkpoint: trailing bytes after the parameter block");
    return out;
}

}  // namespace tmgan
