#include "tmgan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tmgan/kernels.hpp"

namespace tmgan {

namespace {

// Mirror indices into [0, n): -1 -> 0, -2 -> 1, n -> n-1, ...
int reflect_index(int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
}

// Sampled, sum-normalized 1D Gaussian, truncated at 4 sigma.
std::vector<double> gaussian_taps(double sigma_px) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma_px) * (i / sigma_px));
        taps[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (double& t : taps) t /= total;
    return taps;
}

}  // namespace

// ---- specs ---------------------------------------------------------------

void TextureSpec::validate() const {
    require(base_std_hu >= 0.0, "texture: base std must be non-negative");
    require(taps.ndim() == 2, "texture: correlation taps must be a 2D filter");
    require(taps.dim(0) % 2 == 1 && taps.dim(1) % 2 == 1,
            "texture: correlation taps must have odd dimensions");
    require(taps.finite(), "texture: correlation taps must be finite");
    double norm_sq = 0.0;
    for (std::int64_t i = 0; i < taps.size(); ++i) norm_sq += taps[i] * taps[i];
    require(norm_sq > 0.0, "texture: correlation taps must not be all zero");
}

TextureSpec TextureSpec::white(double std_hu, std::uint64_t seed) {
    return {std_hu, Tensor({1, 1}, {1.0}), seed};
}

TextureSpec TextureSpec::low_pass(double std_hu, double sigma_px, std::uint64_t seed) {
    require(sigma_px > 0.0, "texture: low-pass sigma must be positive");
    // Gaussian taps: the filtered spectrum decays monotonically, with no
    // sidelobes to confuse spectral-shape assertions.
    const std::vector<double> g = gaussian_taps(sigma_px);
    const int k = static_cast<int>(g.size());
    Tensor taps({k, k});
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c)
            taps.at2(r, c) = g[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(c)];
    return {std_hu, taps, seed};
}

TextureSpec TextureSpec::band_pass(double std_hu, double sigma_narrow_px, double sigma_wide_px,
                                   std::uint64_t seed) {
    require(sigma_narrow_px > 0.0 && sigma_wide_px > sigma_narrow_px,
            "texture: band-pass needs 0 < sigma_narrow < sigma_wide");
    const std::vector<double> narrow = gaussian_taps(sigma_narrow_px);
    const std::vector<double> wide = gaussian_taps(sigma_wide_px);
    const int k = static_cast<int>(wide.size());
    const int pad = (k - static_cast<int>(narrow.size())) / 2;
    Tensor taps({k, k});
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
            const double w = wide[static_cast<std::size_t>(r)] * wide[static_cast<std::size_t>(c)];
            double n = 0.0;
            if (r >= pad && r < k - pad && c >= pad && c < k - pad)
                n = narrow[static_cast<std::size_t>(r - pad)] *
                    narrow[static_cast<std::size_t>(c - pad)];
            taps.at2(r, c) = n - w;
        }
    return {std_hu, taps, seed};
}

void DeformationSpec::validate() const {
    if (mode == DeformMode::gaussian_blur)
        require(sigma_y_mm > 0.0 && sigma_x_mm > 0.0,
                "deformation: blur sigma must be positive in both axes");
}

void DatasetConfig::validate() const {
    require(phantom_count >= 1, "dataset: need at least one phantom");
    require(phantom_h >= 16 && phantom_w >= 16, "dataset: phantom dims must be at least 16");
    require(patch_size >= 4, "dataset: patch size must be at least 4");
    require(patch_size <= phantom_h && patch_size <= phantom_w,
            "dataset: patch size exceeds phantom dimensions");
    require(pairs_per_phantom >= 1, "dataset: need at least one pair per phantom");
    require(split_fraction > 0.0 && split_fraction < 1.0,
            "dataset: split fraction must lie strictly inside (0,1)");
    require(dy_mm > 0.0 && dx_mm > 0.0, "dataset: pixel spacing must be positive");
    deform.validate();
    noise.validate();
}

// ---- phantom -------------------------------------------------------------

PhantomImage generate_phantom(std::uint64_t seed, int H, int W, int n_shapes) {
    require(H >= 16 && W >= 16, "phantom: dimensions must be at least 16");
    require(n_shapes >= 1, "phantom: need at least one insert");

    PhantomImage ph;
    ph.pixels = Tensor({H, W});
    const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
    const double m = std::min(H, W);
    const double disc_r = 0.45 * m;

    // Water disc on air.
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double dy = r - cy, dx = c - cx;
            if (dy * dy + dx * dx <= disc_r * disc_r) ph.pixels.at2(r, c) = 1000.0;
        }

    // Inserts stay strictly inside the disc: center within 0.5*disc_r, half
    // extents at most 0.12*m, so the farthest corner reaches
    // 0.225*m + 0.12*sqrt(2)*m < 0.45*m.
    for (int s = 0; s < n_shapes; ++s) {
        Rng rng = Rng::stream(seed, stream_key("phantom"), static_cast<std::uint64_t>(s));
        const bool ellipse = rng.uniform() < 0.5;
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dist = rng.uniform(0.0, 0.5 * disc_r);
        const double sy = cy + dist * std::sin(angle);
        const double sx = cx + dist * std::cos(angle);
        const double ay = rng.uniform(0.04, 0.12) * m;
        const double ax = rng.uniform(0.04, 0.12) * m;
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double value = 1000.0 + sign * static_cast<double>(rng.uniform_int(30, 1000));

        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const double dy = (r - sy) / ay, dx = (c - sx) / ax;
                const bool inside = ellipse ? (dy * dy + dx * dx <= 1.0)
                                            : (std::abs(r - sy) <= ay && std::abs(c - sx) <= ax);
                if (inside) ph.pixels.at2(r, c) = value;
            }
    }
    return ph;
}

// ---- texture -------------------------------------------------------------

Tensor sample_texture_stream(const TextureSpec& spec, int H, int W, Rng rng) {
    spec.validate();
    require(H >= 1 && W >= 1, "texture: field dimensions must be positive");
    require(spec.taps.dim(0) <= H && spec.taps.dim(1) <= W,
            "texture: correlation taps larger than the requested field");
    Tensor out({H, W});
    if (spec.base_std_hu == 0.0) return out;

    Tensor white({H, W});
    for (std::int64_t i = 0; i < white.size(); ++i) white[i] = rng.gaussian();

    // Circular filtering by the L2-normalized taps: per-pixel variance is
    // exactly base_std^2 and the spectrum is exactly |K(f)|^2 * base_std^2.
    const Tensor& k = spec.taps;
    const int kh = static_cast<int>(k.dim(0)), kw = static_cast<int>(k.dim(1));
    const int ch = kh / 2, cw = kw / 2;
    double norm_sq = 0.0;
    for (std::int64_t i = 0; i < k.size(); ++i) norm_sq += k[i] * k[i];
    const double scale = spec.base_std_hu / std::sqrt(norm_sq);

    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kh; ++i) {
                const int rr = (r + i - ch + H) % H;
                for (int j = 0; j < kw; ++j) {
                    const int cc = (c + j - cw + W) % W;
                    acc += k.at2(i, j) * white.at2(rr, cc);
                }
            }
            out.at2(r, c) = scale * acc;
        }

    // Mean removal: exactly zeroes the DC component and leaves every other
    // frequency untouched (circular filtering makes DC the only carrier of
    // the mean).
    const double mean = pairwise_sum(out.data.data(), out.size()) / static_cast<double>(out.size());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= mean;
    return out;
}

Tensor sample_texture(const TextureSpec& spec, int H, int W, std::uint64_t draw_index) {
    return sample_texture_stream(spec, H, W, Rng::stream(spec.seed, stream_key("texture"), draw_index));
}

// ---- deformation ---------------------------------------------------------

Tensor apply_deformation(const Tensor& x, const DeformationSpec& spec, double dy_mm, double dx_mm) {
    require(x.ndim() == 2, "deformation: expected a [H,W] image");
    spec.validate();
    if (spec.mode == DeformMode::identity) return x;
    require(dy_mm > 0.0 && dx_mm > 0.0, "deformation: pixel spacing must be positive");

    const int H = static_cast<int>(x.dim(0)), W = static_cast<int>(x.dim(1));
    const std::vector<double> ty = gaussian_taps(spec.sigma_y_mm / dy_mm);
    const std::vector<double> tx = gaussian_taps(spec.sigma_x_mm / dx_mm);
    const int ry = (static_cast<int>(ty.size()) - 1) / 2;
    const int rx = (static_cast<int>(tx.size()) - 1) / 2;
    require(ry < H && rx < W, "deformation: blur kernel wider than the image");

    Tensor horiz({H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int j = -rx; j <= rx; ++j)
                acc += tx[static_cast<std::size_t>(j + rx)] * x.at2(r, reflect_index(c + j, W));
            horiz.at2(r, c) = acc;
        }
    Tensor out({H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int i = -ry; i <= ry; ++i)
                acc += ty[static_cast<std::size_t>(i + ry)] * horiz.at2(reflect_index(r + i, H), c);
            out.at2(r, c) = acc;
        }
    return out;
}

// ---- pairing and the dataset ---------------------------------------------

ImagePair make_pair(const PhantomImage& phantom, const DeformationSpec& deform,
                    const TextureSpec& noise, std::uint64_t seed) {
    ImagePair out;
    out.clean = phantom.pixels;
    out.deformed = apply_deformation(phantom.pixels, deform, phantom.dy_mm, phantom.dx_mm);
    const int H = static_cast<int>(out.clean.dim(0)), W = static_cast<int>(out.clean.dim(1));
    for (int i = 0; i < 2; ++i) {
        Tensor field = sample_texture_stream(
            noise, H, W, Rng::stream(noise.seed, stream_key("input_noise"), seed, static_cast<std::uint64_t>(i)));
        Tensor y = out.deformed;
        for (std::int64_t p = 0; p < y.size(); ++p) y[p] += field[p];
        (i == 0 ? out.y1 : out.y2) = std::move(y);
    }
    return out;
}

namespace {

Tensor crop_patch(const Tensor& img, int row, int col, int p) {
    Tensor out({1, p, p});
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) out[static_cast<std::int64_t>(r) * p + c] = img.at2(row + r, col + c);
    return out;
}

PatchPair make_patch_pair(const Tensor& phantom_pixels, const Tensor& deformed,
                          const DatasetConfig& cfg, std::uint64_t phantom_seed,
                          std::uint64_t pair_seed, int row, int col) {
    PatchPair pair;
    pair.phantom_seed = phantom_seed;
    pair.pair_seed = pair_seed;
    pair.row = row;
    pair.col = col;
    pair.x = crop_patch(phantom_pixels, row, col, cfg.patch_size);

    // Noise is drawn at patch size directly (circular statistics are
    // translation invariant), keeping dataset construction cheap.
    for (int i = 0; i < 2; ++i) {
        Tensor field = sample_texture_stream(
            cfg.noise, cfg.patch_size, cfg.patch_size,
            Rng::stream(cfg.noise.seed, stream_key("input_noise"), pair_seed,
                        static_cast<std::uint64_t>(i)));
        Tensor y = crop_patch(deformed, row, col, cfg.patch_size);
        for (std::int64_t q = 0; q < y.size(); ++q) y[q] += field[q];
        (i == 0 ? pair.y1 : pair.y2) = std::move(y);
    }
    return pair;
}

}  // namespace

Dataset build_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    std::vector<PatchPair> all;
    all.reserve(static_cast<std::size_t>(cfg.phantom_count) *
                static_cast<std::size_t>(cfg.pairs_per_phantom));

    for (int p = 0; p < cfg.phantom_count; ++p) {
        const std::uint64_t phantom_seed = phantom_seed_for(cfg.seed, p);
        PhantomImage ph = generate_phantom(phantom_seed, cfg.phantom_h, cfg.phantom_w, cfg.n_shapes);
        ph.dy_mm = cfg.dy_mm;
        ph.dx_mm = cfg.dx_mm;
        const Tensor deformed = apply_deformation(ph.pixels, cfg.deform, cfg.dy_mm, cfg.dx_mm);

        for (int j = 0; j < cfg.pairs_per_phantom; ++j) {
            const std::uint64_t pair_seed =
                Rng::stream(cfg.seed, stream_key("pair_id"), static_cast<std::uint64_t>(p),
                            static_cast<std::uint64_t>(j))
                    .next_u64();
            Rng pos = Rng::stream(cfg.seed, stream_key("patch_pos"), static_cast<std::uint64_t>(p),
                                  static_cast<std::uint64_t>(j));
            const int row = static_cast<int>(pos.uniform_int(0, cfg.phantom_h - cfg.patch_size));
            const int col = static_cast<int>(pos.uniform_int(0, cfg.phantom_w - cfg.patch_size));
            all.push_back(
                make_patch_pair(ph.pixels, deformed, cfg, phantom_seed, pair_seed, row, col));
        }
    }

    // Seeded shuffle, then a patch-level split.
    Rng shuffle_rng = Rng::stream(cfg.seed, stream_key("split"));
    for (std::size_t i = all.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(
            shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(all[i - 1], all[j]);
    }
    const std::int64_t n = static_cast<std::int64_t>(all.size());
    const std::int64_t train_n = std::llround(cfg.split_fraction * static_cast<double>(n));
    require(train_n >= 1 && train_n <= n - 1,
            "dataset: split " + std::to_string(cfg.split_fraction) + " leaves an empty side with " +
                std::to_string(n) + " patches");

    Dataset out;
    out.train.assign(all.begin(), all.begin() + train_n);
    out.validation.assign(all.begin() + train_n, all.end());
    return out;
}

PatchPair regenerate_patch(const DatasetConfig& cfg, std::uint64_t phantom_seed,
                           std::uint64_t pair_seed, int row, int col) {
    cfg.validate();
    require(row >= 0 && col >= 0 && row + cfg.patch_size <= cfg.phantom_h &&
                col + cfg.patch_size <= cfg.phantom_w,
            "dataset: patch corner lies outside the phantom");
    PhantomImage ph = generate_phantom(phantom_seed, cfg.phantom_h, cfg.phantom_w, cfg.n_shapes);
    const Tensor deformed = apply_deformation(ph.pixels, cfg.deform, cfg.dy_mm, cfg.dx_mm);
    return make_patch_pair(ph.pixels, deformed, cfg, phantom_seed, pair_seed, row, col);
}

Dataset build_dataset(int phantom_count, int patch_size, int pairs_per_phantom,
                      double split_fraction, std::uint64_t seed) {
    DatasetConfig cfg;
    cfg.phantom_count = phantom_count;
    cfg.patch_size = patch_size;
    cfg.pairs_per_phantom = pairs_per_phantom;
    cfg.split_fraction = split_fraction;
    cfg.seed = seed;
    cfg.noise.seed = seed;
    return build_dataset(cfg);
}

}  // namespace tmgan
