#pragma once

// Self-check suites behind the `check` command: finite-difference gradient
// verification of every differentiable building block and both losses, the
// paired-texture distribution checker with its counterexamples, and the
// noise-power-spectrum analytic oracles. All suites are deterministic.

#include <string>
#include <vector>

namespace tmgan {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // one line with the measured numbers
};

struct CheckReport {
    std::vector<CheckResult> results;

    bool all_passed() const;
    // "[PASS] name: detail" / "[FAIL] name: detail", one line per result.
    std::string to_text() const;
};

// Central finite differences against the tape gradients: each primitive op
// plus the discriminator and generator losses, 60 probes each at 1e-4
// relative tolerance in 64-bit.
CheckReport check_grad();

// Distribution checker on 1e5 paired samples: the Gaussian case must pass
// and recover sigma within 3%; the Bernoulli and Laplace counterexamples
// must be flagged as non-Gaussian.
CheckReport check_theorem();

// Radial NPS against closed-form spectra: white noise flat at std^2 * d^2,
// filtered noise matching the taps' DFT magnitude, and Parseval agreement
// between total spectral power and the pixel-domain variance.
CheckReport check_nps();

// suite is one of grad | theorem | nps | all; anything else throws
// ConfigError.
CheckReport check_suite(const std::string& suite);

}  // namespace tmgan
