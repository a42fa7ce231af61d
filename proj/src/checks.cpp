#include "tmgan/checks.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/gradcheck.hpp"
#include "tmgan/losses.hpp"
#include "tmgan/metrics.hpp"
#include "tmgan/models.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/tape.hpp"

namespace tmgan {

bool CheckReport::all_passed() const {
    for (const CheckResult& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

std::string CheckReport::to_text() const {
    std::string out;
    for (const CheckResult& r : results) {
        out += r.passed ? "[PASS] " : "[FAIL] ";
        out += r.name;
        out += ": ";
        out += r.detail;
        out += '\n';
    }
    return out;
}

namespace {

std::string format_detail(const char* fmt, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
    return buf;
}

// ---- gradient suite -----------------------------------------------------

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

// Elementwise nonlinearities have a kink at zero; keep finite-difference
// probes well clear of it.
Tensor away_from_zero(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const double g = rng.gaussian();
        t[i] = g + std::copysign(0.3, g);
    }
    return t;
}

void jitter(Tensor& t, Rng& rng, double scale) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] += scale * rng.gaussian();
}

constexpr int kProbes = 60;
constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-4;

CheckResult run_probe(const std::string& name, const GradCheckable& fn,
                      const std::vector<Tensor>& params, std::uint64_t seed) {
    GradCheckReport rep = finite_diff_check(fn, params, kProbes, kStep, kTolerance, seed);
    CheckResult res;
    res.name = name;
    res.passed = rep.pass;
    res.detail = format_detail("max relative error %.2e over %.0f probes", rep.max_rel_error,
                               static_cast<double>(rep.probes));
    return res;
}

// Wraps a tape-building function of staged leaves into the eval/grads pair
// the finite-difference checker consumes.
GradCheckable checkable_from(
    const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build) {
    GradCheckable fn;
    fn.eval = [build](const std::vector<Tensor>& params) {
        Tape tape;
        std::vector<NodeId> leaves;
        for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
        return tape.value(build(tape, leaves))[0];
    };
    fn.grads = [build](const std::vector<Tensor>& params) {
        Tape tape;
        std::vector<NodeId> leaves;
        for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
        tape.backward(build(tape, leaves));
        std::vector<Tensor> g;
        for (NodeId id : leaves) g.push_back(tape.grad(id));
        return g;
    };
    return fn;
}

const std::vector<int> kTinyDiscWidths = {1, 2, 4, 8};

DiscriminatorParams disc_from_params(const std::vector<Tensor>& p) {
    DiscriminatorParams d;
    d.widths = kTinyDiscWidths;
    for (std::size_t i = 0; i < 4; ++i) {
        d.kernels.push_back(p[2 * i]);
        d.biases.push_back(p[2 * i + 1]);
    }
    d.dense_weight = p[8];
    d.dense_bias = p[9];
    return d;
}

std::vector<Tensor> params_of_disc(DiscriminatorParams& d) {
    std::vector<Tensor> out;
    for (Tensor* t : d.trainable()) out.push_back(*t);
    return out;
}

GeneratorParams gen_from_params(const std::vector<Tensor>& p, const GeneratorArch& arch) {
    GeneratorParams g;
    g.arch = arch;
    for (int i = 0; i < arch.depth; ++i) {
        g.kernels.push_back(p[static_cast<std::size_t>(2 * i)]);
        g.biases.push_back(p[static_cast<std::size_t>(2 * i + 1)]);
    }
    return g;
}

}  // namespace

CheckReport check_grad() {
    CheckReport report;
    Rng rng = Rng::stream(2301, stream_key("grad_check"));

    // Stride-1 convolution, the generator's workhorse.
    report.results.push_back(run_probe(
        "conv2d stride 1",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum_squares(tape.conv2d(v[0], v[1], v[2], 1, 1));
        }),
        {random_tensor({2, 1, 6, 6}, rng), random_tensor({3, 1, 3, 3}, rng, 0.4),
         random_tensor({3}, rng, 0.2)},
        101));

    // Stride-2 convolution, the discriminator's downsampler.
    report.results.push_back(run_probe(
        "conv2d stride 2",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum_squares(tape.conv2d(v[0], v[1], v[2], 2, 1));
        }),
        {random_tensor({1, 2, 8, 8}, rng), random_tensor({3, 2, 3, 3}, rng, 0.4),
         random_tensor({3}, rng, 0.2)},
        102));

    // Train-mode batch norm; running statistics are rebuilt per evaluation
    // so the probe stays a pure function of its parameters.
    report.results.push_back(run_probe(
        "batch_norm",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            Tensor rm({2});
            Tensor rv = Tensor::full({2}, 1.0);
            return tape.sum_squares(tape.batch_norm(v[0], v[1], v[2], true, &rm, &rv, 1e-5));
        }),
        {random_tensor({3, 2, 4, 4}, rng), random_tensor({2}, rng, 0.3),
         random_tensor({2}, rng, 0.3)},
        103));

    report.results.push_back(run_probe(
        "relu",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum_squares(tape.relu(v[0]));
        }),
        {away_from_zero({40}, rng)}, 104));

    report.results.push_back(run_probe(
        "leaky_relu",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum_squares(tape.leaky_relu(v[0], 0.2));
        }),
        {away_from_zero({40}, rng)}, 105));

    report.results.push_back(run_probe(
        "global_avg_pool",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum_squares(tape.global_avg_pool(v[0]));
        }),
        {random_tensor({2, 3, 4, 4}, rng)}, 106));

    report.results.push_back(run_probe(
        "dense with sigmoid head",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum(tape.sigmoid(tape.dense(v[0], v[1], v[2])));
        }),
        {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng, 0.5),
         random_tensor({1}, rng, 0.2)},
        107));

    // The clamped-log path every probability takes inside the losses.
    report.results.push_back(run_probe(
        "sigmoid log chain",
        checkable_from([](Tape& tape, const std::vector<NodeId>& v) {
            return tape.sum(
                tape.log(tape.clamp(tape.sigmoid(v[0]), kProbClamp, 1.0 - kProbClamp)));
        }),
        {random_tensor({30}, rng)}, 108));

    // Full discriminator cross-entropy loss with respect to every theta_d tensor.
    {
        DiscriminatorParams disc = init_discriminator_with_widths<double>(kTinyDiscWidths, 11);
        for (Tensor* t : disc.trainable()) jitter(*t, rng, 0.05);
        const Tensor real = random_tensor({3, 1, 8, 8}, rng);
        const Tensor fake = random_tensor({3, 1, 8, 8}, rng);

        GradCheckable fn;
        fn.eval = [real, fake](const std::vector<Tensor>& p) {
            return discriminator_loss(real, fake, disc_from_params(p));
        };
        fn.grads = [real, fake](const std::vector<Tensor>& p) {
            DiscriminatorParams d = disc_from_params(p);
            Tape tape;
            StagedDiscriminator<double> staged = stage_discriminator(tape, d, true);
            tape.backward(
                discriminator_loss_node(tape, staged, tape.leaf(real), tape.leaf(fake)));
            std::vector<Tensor> g;
            for (NodeId id : staged.trainable) g.push_back(tape.grad(id));
            return g;
        };
        report.results.push_back(run_probe("discriminator loss", fn, params_of_disc(disc), 109));
    }

    // Full generator loss with respect to [phi, gamma], adversary frozen.
    {
        const GeneratorArch arch{3, 2, false};
        GeneratorParams gen = init_generator<double>(arch, 13);
        for (Tensor* t : gen.trainable()) jitter(*t, rng, 0.05);
        DiscriminatorParams disc = init_discriminator_with_widths<double>(kTinyDiscWidths, 17);
        for (Tensor* t : disc.trainable()) jitter(*t, rng, 0.05);

        Batch batch;
        batch.x = random_tensor({2, 1, 8, 8}, rng);
        batch.y1 = batch.x;
        batch.y2 = batch.x;
        jitter(batch.y1, rng, 0.3);
        jitter(batch.y2, rng, 0.3);

        LossConfig adversarial{0.4, 1.0, 0.5, false};
        LossConfig data_only{0.0, 1.0, 0.5, false};

        auto make_fn = [&batch, arch](const LossConfig& cfg, const DiscriminatorParams* disc_p) {
            GradCheckable fn;
            fn.eval = [&batch, arch, cfg, disc_p](const std::vector<Tensor>& p) {
                GeneratorParams g = gen_from_params(p, arch);
                GammaParam gamma{p.back()[0], true};
                return generator_loss(batch, g, gamma, disc_p, cfg);
            };
            fn.grads = [&batch, arch, cfg, disc_p](const std::vector<Tensor>& p) {
                GeneratorParams g = gen_from_params(p, arch);
                GammaParam gamma{p.back()[0], true};
                Tape tape;
                StagedGenerator<double> sg = stage_generator(tape, g, gamma, true);
                StagedDiscriminator<double> sd;
                if (disc_p) sd = stage_discriminator(tape, *disc_p, false);
                GeneratorLossNodes<double> nodes =
                    generator_loss_node(tape, sg, disc_p ? &sd : nullptr, tape.leaf(batch.x),
                                        tape.leaf(batch.y1), tape.leaf(batch.y2), cfg);
                tape.backward(nodes.loss);
                std::vector<Tensor> out;
                for (NodeId id : sg.trainable) out.push_back(tape.grad(id));
                return out;
            };
            return fn;
        };

        std::vector<Tensor> params;
        for (Tensor* t : gen.trainable()) params.push_back(*t);
        params.push_back(Tensor({1}, {0.07}));  // log gamma

        report.results.push_back(
            run_probe("generator loss", make_fn(adversarial, &disc), params, 110));
        report.results.push_back(
            run_probe("generator loss data term", make_fn(data_only, nullptr), params, 111));
    }

    return report;
}

// ---- distribution suite -------------------------------------------------

namespace {

constexpr int kTheoremSamples = 100000;
constexpr double kTheoremSigma = 7.8;

std::vector<double> gaussian_samples(double sigma, Rng rng) {
    std::vector<double> out(kTheoremSamples);
    for (double& v : out) v = sigma * rng.gaussian();
    return out;
}

std::vector<double> bernoulli_samples(double sigma, Rng rng) {
    std::vector<double> out(kTheoremSamples);
    for (double& v : out) v = rng.uniform(0.0, 1.0) < 0.5 ? -sigma : sigma;
    return out;
}

std::vector<double> laplace_samples(double sigma, Rng rng) {
    // Inverse-CDF sampling with scale b = sigma / sqrt(2), matching the
    // Gaussian hypothesis' variance exactly.
    const double b = sigma / std::numbers::sqrt2;
    std::vector<double> out(kTheoremSamples);
    for (double& v : out) {
        const double u = rng.uniform(0.0, 1.0) - 0.5;
        const double t = std::max(1.0 - 2.0 * std::abs(u), 1e-12);
        v = -b * std::copysign(std::log(t), u);
    }
    return out;
}

}  // namespace

CheckReport check_theorem() {
    CheckReport report;
    const double s = kTheoremSigma;

    {
        Theorem1Report rep = theorem1_check(
            gaussian_samples(s, Rng::stream(2302, stream_key("theorem_gauss"), 0)),
            gaussian_samples(s, Rng::stream(2302, stream_key("theorem_gauss"), 1)), s);
        const double rel_std = std::abs(rep.component_std / s - 1.0);
        CheckResult res;
        res.name = "gaussian pair accepted";
        res.passed = rep.pass() && rel_std <= 0.03;
        res.detail = format_detail("component std %.4f vs hypothesis %.1f (%.2f%% off)",
                                   rep.component_std, s, 100.0 * rel_std);
        report.results.push_back(res);
    }

    {
        Theorem1Report rep = theorem1_check(
            bernoulli_samples(s, Rng::stream(2302, stream_key("theorem_bern"), 0)),
            bernoulli_samples(s, Rng::stream(2302, stream_key("theorem_bern"), 1)), s);
        CheckResult res;
        res.name = "bernoulli counterexample rejected";
        res.passed = !rep.difference_gaussian;
        res.detail = format_detail("KS statistic %.3f against threshold %.3f", rep.ks_statistic,
                                   rep.ks_threshold);
        report.results.push_back(res);
    }

    {
        Theorem1Report rep = theorem1_check(
            laplace_samples(s, Rng::stream(2302, stream_key("theorem_lap"), 0)),
            laplace_samples(s, Rng::stream(2302, stream_key("theorem_lap"), 1)), s);
        CheckResult res;
        res.name = "laplace counterexample rejected";
        res.passed = !rep.difference_gaussian;
        res.detail = format_detail("KS statistic %.3f against threshold %.3f", rep.ks_statistic,
                                   rep.ks_threshold);
        report.results.push_back(res);
    }

    return report;
}

// ---- spectrum suite -----------------------------------------------------

namespace {

constexpr int kNpsRois = 256;
constexpr int kNpsSide = 64;
constexpr double kNpsSpacing = 0.78;

std::vector<Tensor> texture_rois(const TextureSpec& spec) {
    std::vector<Tensor> rois;
    rois.reserve(kNpsRois);
    for (int i = 0; i < kNpsRois; ++i)
        rois.push_back(sample_texture(spec, kNpsSide, kNpsSide, static_cast<std::uint64_t>(i)));
    return rois;
}

// Closed-form radial NPS of a circularly filtered white field: the taps'
// DFT magnitude squared, binned over the same grid the estimator uses.
// This is a from-scratch rederivation, kept independent of nps_radial.
std::vector<double> analytic_curve(const Tensor& taps, double std_hu, int N, double d) {
    double norm_sq = 0.0;
    for (std::int64_t i = 0; i < taps.size(); ++i) norm_sq += taps[i] * taps[i];
    const int kh = static_cast<int>(taps.dim(0)), kw = static_cast<int>(taps.dim(1));
    const int bins = N / 2;
    const double width = 1.0 / (2.0 * d) / bins;
    std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (int ky = 0; ky < N; ++ky) {
        const double fy = (ky <= N / 2 ? ky : ky - N) / (N * d);
        for (int kx = 0; kx < N; ++kx) {
            if (ky == 0 && kx == 0) continue;
            const double fx = (kx <= N / 2 ? kx : kx - N) / (N * d);
            const int b = static_cast<int>(std::lround(std::hypot(fy, fx) / width)) - 1;
            if (b < 0 || b >= bins) continue;
            std::complex<double> khat(0.0, 0.0);
            for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j)
                    khat += taps.at2(i, j) *
                            std::polar(1.0, -2.0 * std::numbers::pi * (fy * i * d + fx * j * d));
            sums[static_cast<std::size_t>(b)] += std::norm(khat) / norm_sq;
            ++counts[static_cast<std::size_t>(b)];
        }
    }
    for (int b = 0; b < bins; ++b)
        sums[static_cast<std::size_t>(b)] *=
            std_hu * std_hu * d * d / static_cast<double>(counts[static_cast<std::size_t>(b)]);
    return sums;
}

double mean_roi_variance(const std::vector<Tensor>& rois) {
    double acc = 0.0;
    for (const Tensor& r : rois) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < r.size(); ++i) mean += r[i];
        mean /= static_cast<double>(r.size());
        double var = 0.0;
        for (std::int64_t i = 0; i < r.size(); ++i) var += (r[i] - mean) * (r[i] - mean);
        acc += var / static_cast<double>(r.size());
    }
    return acc / static_cast<double>(rois.size());
}

}  // namespace

CheckReport check_nps() {
    CheckReport report;
    const double d = kNpsSpacing;

    {
        const double s = 30.0;
        NPSCurve curve = nps_radial(texture_rois(TextureSpec::white(s, 2303)), d, d);
        const double expected = s * s * d * d;
        double worst = 0.0;
        for (double p : curve.power) worst = std::max(worst, std::abs(p / expected - 1.0));
        CheckResult res;
        res.name = "white spectrum flat";
        res.passed = worst <= 0.10;
        res.detail = format_detail("worst bin %.2f%% from %.1f HU^2 mm^2", 100.0 * worst, expected);
        report.results.push_back(res);
    }

    TextureSpec filtered = TextureSpec::low_pass(25.0, 1.5, 2304);
    const std::vector<Tensor> filtered_rois = texture_rois(filtered);
    NPSCurve filtered_curve = nps_radial(filtered_rois, d, d);

    {
        const std::vector<double> oracle = analytic_curve(filtered.taps, 25.0, kNpsSide, d);
        double worst = 0.0;
        for (std::size_t b = 0; b < filtered_curve.power.size(); ++b)
            worst = std::max(worst, std::abs(filtered_curve.power[b] / oracle[b] - 1.0));
        CheckResult res;
        res.name = "filtered spectrum matches taps DFT";
        res.passed = filtered_curve.power.size() == oracle.size() && worst <= 0.10;
        res.detail = format_detail("worst bin %.2f%% from the analytic curve", 100.0 * worst);
        report.results.push_back(res);
    }

    {
        const double variance = mean_roi_variance(filtered_rois);
        const double rel = std::abs(filtered_curve.total_power / variance - 1.0);
        CheckResult res;
        res.name = "parseval energy balance";
        res.passed = rel <= 0.02;
        res.detail = format_detail("spectral power %.3f vs pixel variance %.3f (%.3f%% apart)",
                                   filtered_curve.total_power, variance, 100.0 * rel);
        report.results.push_back(res);
    }

    return report;
}

CheckReport check_suite(const std::string& suite) {
    if (suite == "grad") return check_grad();
    if (suite == "theorem") return check_theorem();
    if (suite == "nps") return check_nps();
    if (suite == "all") {
        CheckReport all;
        for (const CheckReport& part : {check_grad(), check_theorem(), check_nps()})
            all.results.insert(all.results.end(), part.results.begin(), part.results.end());
        return all;
    }
    throw ConfigError("check: unknown suite '" + suite + "' (expected grad, theorem, nps, or all)");
}

}  // namespace tmgan
