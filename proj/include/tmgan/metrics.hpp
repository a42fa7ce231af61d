#pragma once

// Quantitative evaluation: PSNR, SSIM, noise standard deviation, the
// radially averaged noise power spectrum, Monte-Carlo bias estimation, and
// the paired-sample distribution checker behind the texture-isolation
// guarantee.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

struct NPSCurve {
    std::vector<double> bin_centers;  // cycles/mm, strictly increasing, (0, Nyquist]
    std::vector<double> power;        // HU^2 * mm^2, radially averaged per bin
    int ensemble_count = 0;
    // Integral of the full (unbinned) 2D spectrum over frequency: equals
    // the mean per-ROI variance by Parseval, which tests assert.
    double total_power = 0.0;
};

enum class NpsDetrend {
    per_roi_mean,   // pure-noise inputs: subtract each ROI's own mean
    ensemble_mean,  // repeated scans: subtract the ensemble-mean image
};

enum class TextureRole { estimation_noise, target };

// A bag of zero-mean texture patches (noise differences or single draws).
struct TextureSampleSet {
    std::vector<Tensor> patches;
    TextureRole role = TextureRole::target;

    // Enforces near-zero mean: |mean| below 1% of the pooled std.
    void validate() const;
    std::vector<double> pooled() const;
};

struct Theorem1Report {
    bool difference_gaussian = false;  // d1-d2 consistent with N(0, 2*sigma^2)
    bool symmetric = false;            // d1 symmetric about zero
    double ks_statistic = 0.0;         // sqrt(n)-scaled KS distance
    double ks_threshold = 0.0;         // significance-0.01 critical value
    double component_std = 0.0;        // std(d1-d2)/sqrt(2)
    double max_symmetry_score = 0.0;   // worst CF imaginary part, in sigmas
    std::string note;

    bool pass() const { return difference_gaussian && symmetric; }
};

struct BiasEstimate {
    Tensor bias;                 // mean enhanced output minus the clean image
    std::vector<Tensor> deltas;  // per-draw texture residuals
};

// 10*log10(peak^2 / MSE); identical inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid windows only.
double ssim(const Tensor& a, const Tensor& b, double dynamic_range);

// Unbiased sample standard deviation after mean removal; >= 100 pixels.
double noise_std(const Tensor& region);

// Radially averaged NPS over an ensemble of square power-of-two ROIs.
// bins == 0 picks one bin per DFT cell (N/2 bins of width 1/(N*d)).
NPSCurve nps_radial(const std::vector<Tensor>& rois, double dy_mm, double dx_mm, int bins = 0,
                    NpsDetrend detrend = NpsDetrend::per_roi_mean);

// L2 distance between the two curves after each is scaled to unit total
// power: compares spectral shape, ignoring magnitude.
double nps_distance(const NPSCurve& a, const NPSCurve& b);

// Monte-Carlo decomposition of an enhancer's output on one clean image:
// bias  = mean_m enhance(deform(x) + w_m) - x
// delta = each draw minus the reconstruction base fl(x + bias), so
// x + bias + delta_m reproduces draw m bitwise.
BiasEstimate estimate_bias(const std::function<Tensor(const Tensor&)>& enhance, const Tensor& x,
                           const TextureSpec& noise, int M,
                           const DeformationSpec& deform = DeformationSpec::identity(),
                           double dy_mm = 0.78, double dx_mm = 0.78);

// Distributional checks on paired texture samples: (a) d1-d2 against
// N(0, 2*sigma^2) by Kolmogorov-Smirnov at significance 0.01, (b) symmetry
// of d1 about zero via the empirical characteristic function's imaginary
// part, (c) the implied per-component std. Independence of the draws is
// assumed, not tested — the report says so.
Theorem1Report theorem1_check(const std::vector<double>& d1, const std::vector<double>& d2,
                              double sigma_hypothesis);
Theorem1Report theorem1_check(const TextureSampleSet& s1, const TextureSampleSet& s2,
                              double sigma_hypothesis);

}  // namespace tmgan
