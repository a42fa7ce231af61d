#include "tmgan/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "tmgan/kernels.hpp"
#include "tmgan/rng.hpp"

namespace tmgan {

namespace {

double mean_of(const double* data, std::int64_t n) {
    return pairwise_sum(data, n) / static_cast<double>(n);
}

// Unbiased std after mean removal.
double sample_std(const std::vector<double>& v) {
    const std::int64_t n = static_cast<std::int64_t>(v.size());
    const double mu = mean_of(v.data(), n);
    std::vector<double> centered(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) centered[i] = v[i] - mu;
    const double ss = pairwise_sum_squares(centered.data(), n);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

// ---- sample sets ---------------------------------------------------------

void TextureSampleSet::validate() const {
    require(!patches.empty(), "texture samples: the set is empty");
    const std::vector<double> all = pooled();
    require(all.size() >= 2, "texture samples: need at least two values");
    const double mu = mean_of(all.data(), static_cast<std::int64_t>(all.size()));
    const double sd = sample_std(all);
    require(sd > 0.0, "texture samples: the pooled set is constant");
    require(std::abs(mu) < 0.01 * sd,
            "texture samples: pooled mean " + std::to_string(mu) +
                " is not small against std " + std::to_string(sd));
}

std::vector<double> TextureSampleSet::pooled() const {
    std::vector<double> out;
    for (const Tensor& p : patches) out.insert(out.end(), p.data.begin(), p.data.end());
    return out;
}

// ---- scalar metrics ------------------------------------------------------

double psnr(const Tensor& a, const Tensor& b, double peak) {
    require(a.same_shape(b), "psnr: shape mismatch");
    require(peak > 0.0, "psnr: peak must be positive");
    std::vector<double> diff(static_cast<std::size_t>(a.size()));
    for (std::int64_t i = 0; i < a.size(); ++i) diff[static_cast<std::size_t>(i)] = a[i] - b[i];
    const double mse = pairwise_sum_squares(diff.data(), a.size()) / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kSsimWindow = 11;

std::array<double, kSsimWindow> ssim_window_taps() {
    std::array<double, kSsimWindow> g{};
    const double sigma = 1.5;
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - (kSsimWindow - 1) / 2.0;
        g[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / (sigma * sigma));
        total += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g) v /= total;
    return g;
}

// Valid-mode separable filtering with the SSIM window.
Tensor ssim_filter(const Tensor& img) {
    static const std::array<double, kSsimWindow> g = ssim_window_taps();
    const int H = static_cast<int>(img.dim(0)), W = static_cast<int>(img.dim(1));
    const int Wo = W - kSsimWindow + 1, Ho = H - kSsimWindow + 1;
    Tensor horiz({H, Wo});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < Wo; ++c) {
            double acc = 0.0;
            for (int j = 0; j < kSsimWindow; ++j)
                acc += g[static_cast<std::size_t>(j)] * img.at2(r, c + j);
            horiz.at2(r, c) = acc;
        }
    Tensor out({Ho, Wo});
    for (int r = 0; r < Ho; ++r)
        for (int c = 0; c < Wo; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += g[static_cast<std::size_t>(i)] * horiz.at2(r + i, c);
            out.at2(r, c) = acc;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double dynamic_range) {
    require(a.ndim() == 2, "ssim: expected [H,W] images");
    require(a.same_shape(b), "ssim: shape mismatch");
    require(dynamic_range > 0.0, "ssim: dynamic range must be positive");
    require(a.dim(0) >= kSsimWindow && a.dim(1) >= kSsimWindow,
            "ssim: image smaller than the 11x11 window");

    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

    Tensor aa(a.shape), bb(a.shape), ab(a.shape);
    for (std::int64_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const Tensor mu_a = ssim_filter(a), mu_b = ssim_filter(b);
    const Tensor e_aa = ssim_filter(aa), e_bb = ssim_filter(bb), e_ab = ssim_filter(ab);

    std::vector<double> per_window(static_cast<std::size_t>(mu_a.size()));
    for (std::int64_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = e_aa[i] - ma * ma;
        const double vb = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        per_window[static_cast<std::size_t>(i)] =
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return pairwise_sum(per_window.data(), mu_a.size()) / static_cast<double>(mu_a.size());
}

double noise_std(const Tensor& region) {
    require(region.size() >= 100, "noise_std: need at least 100 pixels, got " +
                                      std::to_string(region.size()));
    return sample_std(region.data);
}

// ---- NPS -----------------------------------------------------------------

NPSCurve nps_radial(const std::vector<Tensor>& rois, double dy_mm, double dx_mm, int bins,
                    NpsDetrend detrend) {
    require(rois.size() >= 2, "nps: need at least two ROIs");
    require(dy_mm > 0.0 && dx_mm > 0.0, "nps: pixel spacing must be positive");
    const Shape shape = rois.front().shape;
    require(shape.size() == 2 && shape[0] == shape[1], "nps: ROIs must be square [N,N]");
    require(is_power_of_two(shape[0]), "nps: ROI side must be a power of two");
    for (const Tensor& r : rois)
        require(r.shape == shape, "nps: ROIs differ in size");

    const int N = static_cast<int>(shape[0]);
    if (bins == 0) bins = N / 2;
    require(bins >= 1, "nps: bin count must be positive");

    Tensor ensemble_mean({N, N});
    if (detrend == NpsDetrend::ensemble_mean) {
        for (const Tensor& r : rois)
            for (std::int64_t i = 0; i < r.size(); ++i) ensemble_mean[i] += r[i];
        for (std::int64_t i = 0; i < ensemble_mean.size(); ++i)
            ensemble_mean[i] /= static_cast<double>(rois.size());
    }

    fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(N) * N);
    require(buf != nullptr, "nps: FFT buffer allocation failed");
    fftw_plan plan = fftw_plan_dft_2d(N, N, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    require(plan != nullptr, "nps: FFT planning failed");

    // Ensemble-averaged squared magnitudes, accumulated in ROI order.
    std::vector<double> power2d(static_cast<std::size_t>(N) * N, 0.0);
    for (const Tensor& roi : rois) {
        double roi_mean = 0.0;
        if (detrend == NpsDetrend::per_roi_mean) roi_mean = mean_of(roi.data.data(), roi.size());
        for (std::int64_t i = 0; i < roi.size(); ++i) {
            const double v =
                roi[i] - (detrend == NpsDetrend::per_roi_mean ? roi_mean : ensemble_mean[i]);
            buf[i][0] = v;
            buf[i][1] = 0.0;
        }
        fftw_execute(plan);
        for (std::int64_t i = 0; i < roi.size(); ++i)
            power2d[static_cast<std::size_t>(i)] += buf[i][0] * buf[i][0] + buf[i][1] * buf[i][1];
    }
    fftw_destroy_plan(plan);
    fftw_free(buf);

    // NPS scaling: |F|^2 * (dx*dy) / (Nx*Ny), averaged over the ensemble.
    const double scale = dy_mm * dx_mm / (static_cast<double>(N) * N * static_cast<double>(rois.size()));
    for (double& p : power2d) p *= scale;

    NPSCurve curve;
    curve.ensemble_count = static_cast<int>(rois.size());
    const double nyquist = 1.0 / (2.0 * std::max(dy_mm, dx_mm));
    const double width = nyquist / bins;
    curve.bin_centers.resize(static_cast<std::size_t>(bins));
    curve.power.assign(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) curve.bin_centers[static_cast<std::size_t>(b)] = (b + 1) * width;

    const double cell_area = 1.0 / (static_cast<double>(N) * dy_mm) / (static_cast<double>(N) * dx_mm);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (int ky = 0; ky < N; ++ky) {
        const double fy = (ky <= N / 2 ? ky : ky - N) / (static_cast<double>(N) * dy_mm);
        for (int kx = 0; kx < N; ++kx) {
            if (ky == 0 && kx == 0) continue;  // DC carries no noise power after detrending
            const double fx = (kx <= N / 2 ? kx : kx - N) / (static_cast<double>(N) * dx_mm);
            const double f = std::hypot(fy, fx);
            curve.total_power += power2d[static_cast<std::size_t>(ky) * N + static_cast<std::size_t>(kx)] * cell_area;
            const int b = static_cast<int>(std::lround(f / width)) - 1;
            if (b < 0 || b >= bins) continue;  // beyond Nyquist (corner cells) or sub-DC
            curve.power[static_cast<std::size_t>(b)] +=
                power2d[static_cast<std::size_t>(ky) * N + static_cast<std::size_t>(kx)];
            ++counts[static_cast<std::size_t>(b)];
        }
    }
    for (int b = 0; b < bins; ++b)
        if (counts[static_cast<std::size_t>(b)] > 0)
            curve.power[static_cast<std::size_t>(b)] /=
                static_cast<double>(counts[static_cast<std::size_t>(b)]);
    return curve;
}

double nps_distance(const NPSCurve& a, const NPSCurve& b) {
    require(a.bin_centers.size() == b.bin_centers.size() && !a.bin_centers.empty(),
            "nps_distance: curves have different bin counts");
    for (std::size_t i = 0; i < a.bin_centers.size(); ++i)
        require(std::abs(a.bin_centers[i] - b.bin_centers[i]) <=
                    1e-9 * std::max(1.0, std::abs(a.bin_centers[i])),
                "nps_distance: bin centers differ");
    const double ta = pairwise_sum(a.power.data(), static_cast<std::int64_t>(a.power.size()));
    const double tb = pairwise_sum(b.power.data(), static_cast<std::int64_t>(b.power.size()));
    if (ta == 0.0 && tb == 0.0) return 0.0;
    require(ta > 0.0 && tb > 0.0, "nps_distance: cannot normalize an all-zero curve");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.power.size(); ++i) {
        const double d = a.power[i] / ta - b.power[i] / tb;
        acc += d * d;
    }
    return std::sqrt(acc);
}

// ---- bias / texture decomposition ----------------------------------------

BiasEstimate estimate_bias(const std::function<Tensor(const Tensor&)>& enhance, const Tensor& x,
                           const TextureSpec& noise, int M, const DeformationSpec& deform,
                           double dy_mm, double dx_mm) {
    require(static_cast<bool>(enhance), "estimate_bias: enhancer is empty");
    require(x.ndim() == 2, "estimate_bias: expected a [H,W] clean image");
    require(M >= 2, "estimate_bias: need at least two draws");
    const int H = static_cast<int>(x.dim(0)), W = static_cast<int>(x.dim(1));
    const Tensor deformed = apply_deformation(x, deform, dy_mm, dx_mm);

    BiasEstimate out;
    out.deltas.reserve(static_cast<std::size_t>(M));
    Tensor sum({H, W});
    for (int m = 0; m < M; ++m) {
        Tensor y = deformed;
        const Tensor w = sample_texture_stream(
            noise, H, W, Rng::stream(noise.seed, stream_key("bias_probe"), static_cast<std::uint64_t>(m)));
        for (std::int64_t i = 0; i < y.size(); ++i) y[i] += w[i];
        Tensor enhanced = enhance(y);
        require(enhanced.same_shape(x), "estimate_bias: enhancer changed the image shape");
        for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += enhanced[i];
        out.deltas.push_back(std::move(enhanced));
    }

    out.bias = Tensor({H, W});
    Tensor base({H, W});
    for (std::int64_t i = 0; i < sum.size(); ++i) {
        const double mean = sum[i] / static_cast<double>(M);
        out.bias[i] = mean - x[i];
        // The reconstruction base is x + bias as actually rounded, so
        // x + bias + delta_m reproduces each draw bitwise.
        base[i] = x[i] + out.bias[i];
    }
    for (Tensor& d : out.deltas)
        for (std::int64_t i = 0; i < d.size(); ++i) d[i] -= base[i];
    return out;
}

// ---- paired-sample distribution checks -----------------------------------

namespace {

// Standard normal CDF evaluated at x/sd.
double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::numbers::sqrt2)); }

}  // namespace

Theorem1Report theorem1_check(const std::vector<double>& d1, const std::vector<double>& d2,
                              double sigma_hypothesis) {
    require(d1.size() == d2.size(), "theorem check: paired samples differ in count");
    require(d1.size() >= 10000, "theorem check: need at least 10^4 paired samples, got " +
                                    std::to_string(d1.size()));
    require(sigma_hypothesis > 0.0, "theorem check: sigma hypothesis must be positive");
    const std::size_t n = d1.size();
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    Theorem1Report rep;
    rep.note = "independence of the paired draws is assumed, not tested";

    // (a) Kolmogorov-Smirnov: d1-d2 against N(0, 2 sigma^2).
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = d1[i] - d2[i];
    std::vector<double> sorted = diff;
    std::sort(sorted.begin(), sorted.end());
    const double diff_sd = sigma_hypothesis * std::numbers::sqrt2;
    double d_stat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = normal_cdf(sorted[i], diff_sd);
        d_stat = std::max(d_stat, cdf - static_cast<double>(i) / static_cast<double>(n));
        d_stat = std::max(d_stat, static_cast<double>(i + 1) / static_cast<double>(n) - cdf);
    }
    rep.ks_statistic = sqrt_n * d_stat;
    rep.ks_threshold = 1.628;  // asymptotic critical value at significance 0.01
    rep.difference_gaussian = rep.ks_statistic <= rep.ks_threshold;

    // (c) implied per-component std.
    rep.component_std = sample_std(diff) / std::numbers::sqrt2;

    // (b) symmetry of d1 about zero: the characteristic function of a
    // symmetric variable is real, so the empirical imaginary part
    // mean(sin(t*d1)) must vanish within sampling error at every probe t.
    const double s1 = sample_std(d1);
    require(s1 > 0.0, "theorem check: first component is constant");
    rep.max_symmetry_score = 0.0;
    for (const double t_scale : {0.5, 1.0, 1.5, 2.0}) {
        const double t = t_scale / s1;
        std::vector<double> sins(n);
        for (std::size_t i = 0; i < n; ++i) sins[i] = std::sin(t * d1[i]);
        const double mu = mean_of(sins.data(), static_cast<std::int64_t>(n));
        const double sd = std::max(sample_std(sins), 1e-300);
        rep.max_symmetry_score = std::max(rep.max_symmetry_score, std::abs(mu) / (sd / sqrt_n));
    }
    rep.symmetric = rep.max_symmetry_score < 4.0;
    return rep;
}

Theorem1Report theorem1_check(const TextureSampleSet& s1, const TextureSampleSet& s2,
                              double sigma_hypothesis) {
    return theorem1_check(s1.pooled(), s2.pooled(), sigma_hypothesis);
}

}  // namespace tmgan
