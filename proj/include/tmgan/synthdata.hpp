#pragma once

// Synthetic data pipeline: piecewise-constant phantoms, correlated Gaussian
// texture fields, the deformation operator, paired corrupted inputs, and
// the patch dataset with its train/validation split.
//
// Everything here is a pure function of (spec, seed): regenerating with the
// same arguments reproduces every pixel bitwise. Independent draws come
// from labeled RNG streams, so e.g. target-texture banks and input-noise
// draws can never collide even when they share a master seed.

#include <cstdint>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

// Pixel values are offset-HU: air = 0, water = 1000.
struct PhantomImage {
    Tensor pixels;  // [H,W]
    double dy_mm = 0.78;
    double dx_mm = 0.78;
};

// Zero-mean correlated Gaussian texture: white noise circularly filtered by
// `taps` (L2-normalized internally, so the output std equals base_std_hu
// regardless of the filter), then mean-removed. Circular filtering keeps
// the spectrum exactly |K(f)|^2 * std^2 per frequency cell, which the NPS
// tests lean on.
struct TextureSpec {
    double base_std_hu = 30.0;
    Tensor taps = Tensor({1, 1}, {1.0});  // odd-sized [kh,kw] correlation filter
    std::uint64_t seed = 0;

    void validate() const;

    static TextureSpec white(double std_hu, std::uint64_t seed);
    // Separable Gaussian taps: smooth low-pass with a monotone spectrum.
    static TextureSpec low_pass(double std_hu, double sigma_px, std::uint64_t seed);
    // Difference-of-Gaussians taps: band-pass, used as the headline target.
    static TextureSpec band_pass(double std_hu, double sigma_narrow_px, double sigma_wide_px,
                                 std::uint64_t seed);
};

enum class DeformMode { identity, gaussian_blur };

struct DeformationSpec {
    DeformMode mode = DeformMode::identity;
    double sigma_y_mm = 0.0, sigma_x_mm = 0.0;

    void validate() const;

    static DeformationSpec identity() { return {}; }
    static DeformationSpec blur(double sigma_mm) {
        return {DeformMode::gaussian_blur, sigma_mm, sigma_mm};
    }
};

// One training example: clean ground-truth patch and the two independently
// corrupted observations of it, all [1,p,p]. The provenance fields are
// enough to regenerate the pixels bitwise.
struct PatchPair {
    Tensor x, y1, y2;
    std::uint64_t phantom_seed = 0, pair_seed = 0;
    int row = 0, col = 0;
};

// Full-image counterpart used for evaluation and inference demos.
struct ImagePair {
    Tensor clean, deformed, y1, y2;  // all [H,W]
};

struct Dataset {
    std::vector<PatchPair> train, validation;
};

struct DatasetConfig {
    int phantom_count = 8;
    int phantom_h = 128, phantom_w = 128;
    int n_shapes = 5;
    double dy_mm = 0.78, dx_mm = 0.78;
    int patch_size = 32;
    int pairs_per_phantom = 64;
    double split_fraction = 0.97;
    DeformationSpec deform;
    TextureSpec noise{30.0, Tensor({1, 1}, {1.0}), 0};
    std::uint64_t seed = 0;

    void validate() const;
};

// Water disc on air with n_shapes random ellipse/rectangle inserts of
// contrast drawn from +-[30,1000] offset-HU, all strictly inside the disc.
PhantomImage generate_phantom(std::uint64_t seed, int H, int W, int n_shapes);

// One texture draw; distinct draw_index gives an independent field.
Tensor sample_texture(const TextureSpec& spec, int H, int W, std::uint64_t draw_index);

// Same field construction, but the randomness comes from a caller-owned
// stream — the hook that keeps different draw roles on disjoint streams.
Tensor sample_texture_stream(const TextureSpec& spec, int H, int W, Rng rng);

// Identity, or separable Gaussian blur (sigma in mm, converted through the
// pixel spacing, truncated at 4 sigma, reflective boundaries).
Tensor apply_deformation(const Tensor& x, const DeformationSpec& spec, double dy_mm, double dx_mm);

// y_i = deform(x) + independent texture draw i, draws keyed off (seed, i).
ImagePair make_pair(const PhantomImage& phantom, const DeformationSpec& deform,
                    const TextureSpec& noise, std::uint64_t seed);

// Random patch locations over freshly generated phantoms, seeded shuffle,
// disjoint split at the patch level.
Dataset build_dataset(const DatasetConfig& cfg);

// Desk-scale defaults: 128x128 phantoms with five inserts, identity
// deformation, white noise at 30 HU.
Dataset build_dataset(int phantom_count, int patch_size, int pairs_per_phantom,
                      double split_fraction, std::uint64_t seed);

// Seed of the i-th phantom in a dataset — the same derivation
// build_dataset uses internally, exposed so companion tooling can
// regenerate identical phantom images from a manifest.
inline std::uint64_t phantom_seed_for(std::uint64_t dataset_seed, int index) {
    return Rng::stream(dataset_seed, stream_key("phantom_id"), static_cast<std::uint64_t>(index))
        .next_u64();
}

// Rebuilds one patch pair from its recorded provenance (phantom seed, pair
// seed, corner) — bitwise identical to the build_dataset output, which is
// what makes dataset manifests audit-able.
PatchPair regenerate_patch(const DatasetConfig& cfg, std::uint64_t phantom_seed,
                           std::uint64_t pair_seed, int row, int col);

}  // namespace tmgan
