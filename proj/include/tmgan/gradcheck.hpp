#pragma once

// Finite-difference gradient checking: compares tape gradients against
// central differences at randomly probed coordinates. The workhorse behind
// `tmgan check grad` and the per-primitive test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
    int probes = 0;
};

// A scalar function of a parameter list, with both a pure evaluation (used
// for the finite differences) and a tape-backed gradient.
struct GradCheckable {
    std::function<double(const std::vector<Tensor>&)> eval;
    std::function<std::vector<Tensor>(const std::vector<Tensor>&)> grads;
};

// Central differences with step h at `probe_count` random coordinates.
// Relative error uses a floor of 1e-6 in the denominator so coordinates
// where both sides vanish do not divide zero by zero.
inline GradCheckReport finite_diff_check(const GradCheckable& fn, const std::vector<Tensor>& params,
                                         int probe_count, double h, double tolerance,
                                         std::uint64_t seed = 71) {
    require(probe_count > 0, "finite_diff_check: probe_count must be positive");
    require(h > 0.0, "finite_diff_check: h must be positive");

    const std::vector<Tensor> analytic = fn.grads(params);
    require(analytic.size() == params.size(), "finite_diff_check: gradient count mismatch");

    Rng rng = Rng::stream(seed, stream_key("gradcheck"));
    GradCheckReport report;
    report.probes = probe_count;
    std::vector<Tensor> work = params;
    for (int probe = 0; probe < probe_count; ++probe) {
        const std::size_t t = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
        const std::int64_t j = rng.uniform_int(0, params[t].size() - 1);

        const double saved = work[t][j];
        work[t][j] = saved + h;
        const double f_plus = fn.eval(work);
        work[t][j] = saved - h;
        const double f_minus = fn.eval(work);
        work[t][j] = saved;

        const double fd = (f_plus - f_minus) / (2.0 * h);
        const double an = analytic[t][j];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        const double rel = std::abs(fd - an) / denom;
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace tmgan
