#pragma once

// The run configuration file: one flat `key = value` text covering the
// loss, schedule, optimizer, target texture, architecture, and synthetic
// dataset settings. Unknown and duplicate keys are errors; keys left out
// keep their built-in defaults, and command-line flags override both.
//
// The same struct renders back to text with shortest-round-trip numbers,
// so render -> parse -> render is byte-stable and a stored config
// regenerates its run exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "tmgan/models.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/trainer.hpp"

namespace tmgan {

struct RunConfig {
    // Loss weights and the adversarial pressure.
    double lambda = 0.4;
    double sigma_hu = 7.8;
    double alpha = 0.5;
    bool saturating_adversarial = false;

    // Schedule and optimizer.
    double eta = 0.3;
    double threshold_d = 0.2;
    int max_disc_updates = 1;
    int total_updates = 2000;
    double lr_gen = 3e-5;
    double lr_disc = 3e-6;
    int batch_size = 32;
    std::uint64_t seed = 0;
    Precision precision = Precision::test64;

    // Target texture the adversary pushes toward.
    std::string target_kind = "band_pass";  // white | low_pass | band_pass
    double target_std = 7.8;
    double target_sigma_px = 1.5;         // low_pass
    double target_sigma_narrow_px = 1.0;  // band_pass
    double target_sigma_wide_px = 3.0;    // band_pass
    std::uint64_t target_seed = 0;

    // Generator architecture; gamma is the learnable difference scale.
    int arch_depth = 7;
    int arch_width = 32;
    bool arch_batch_norm = false;
    bool gamma_learnable = true;

    // Synthetic dataset.
    int phantom_count = 8;
    int phantom_h = 128;
    int phantom_w = 128;
    int n_shapes = 5;
    double dy_mm = 0.78;
    double dx_mm = 0.78;
    int patch_size = 32;
    int pairs_per_phantom = 64;
    double split_fraction = 0.97;
    std::string noise_kind = "white";  // white | low_pass | band_pass
    double noise_std = 30.0;
    double noise_sigma_px = 1.5;
    double noise_sigma_narrow_px = 1.0;
    double noise_sigma_wide_px = 3.0;
    std::uint64_t noise_seed = 0;
    std::uint64_t data_seed = 0;
    std::string deform_mode = "identity";  // identity | gaussian_blur
    double deform_sigma_mm = 0.78;

    // Assembled sub-configs. Each throws ConfigError on a bad kind string.
    TextureSpec target() const;
    TextureSpec noise() const;
    DeformationSpec deform() const;
    GeneratorArch arch() const;
    DatasetConfig dataset() const;
    TrainConfig train() const;

    // Runs every sub-config validation; all violations surface as
    // ConfigError so the CLI can map them to the usage exit code.
    void validate() const;

    // One `key = value` line per field, in declaration order.
    std::string render() const;

    // Assigns one field from its text form; unknown key or bad value
    // throws ConfigError. This is the flag-override hook.
    void set(const std::string& key, const std::string& value);

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
};

// All recognized keys, in render order.
std::vector<std::string> run_config_keys();

}  // namespace tmgan
