#include <doctest.h>

#include <cmath>

#include "tmgan/inference.hpp"
#include "tmgan/precision.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/synthdata.hpp"

using namespace tmgan;

namespace {

// A generator with a genuinely non-trivial residual: fresh init plus a
// small random bump on every parameter.
GeneratorParams perturbed_generator(std::uint64_t seed) {
    GeneratorArch arch;
    arch.depth = 4;
    arch.width = 6;
    GeneratorParams gen = init_generator<double>(arch, seed);
    Rng rng = Rng::stream(seed, stream_key("perturb"));
    for (TensorT<double>* p : gen.trainable())
        for (std::int64_t i = 0; i < p->size(); ++i) (*p)[i] += 0.05 * rng.gaussian();
    return gen;
}

Tensor random_image(int h, int w, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 0);
    Tensor t({h, w});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 1000.0 + 40.0 * rng.gaussian();
    return t;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("a fresh network is the identity") {
    GeneratorArch arch;  // zero-initialized final layer -> zero residual
    arch.depth = 5;
    arch.width = 8;
    GeneratorParams gen = init_generator<double>(arch, 3);
    Tensor y = random_image(48, 40, 4);
    Tensor out = enhance(gen, y);
    CHECK(out.bitwise_equal(y));
}

TEST_CASE("repeated application is bitwise stable") {
    GeneratorParams gen = perturbed_generator(5);
    Tensor y = random_image(32, 32, 6);
    Tensor a = enhance(gen, y);
    Tensor b = enhance(gen, y);
    CHECK_FALSE(a.bitwise_equal(y));
    CHECK(a.bitwise_equal(b));
}

TEST_CASE("patch-trained weights apply to whole images") {
    // Fully convolutional: enhancing a crop and cropping the enhanced
    // whole image agree wherever the receptive field sees no seam.
    GeneratorParams gen = perturbed_generator(7);
    const int margin = gen.arch.depth;  // one pixel of support per 3x3 layer
    Tensor whole = random_image(128, 128, 8);
    Tensor enhanced = enhance(gen, whole);

    const int p = 40, r0 = 31, c0 = 57;
    Tensor patch({p, p});
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) patch.at2(r, c) = whole.at2(r0 + r, c0 + c);
    Tensor patch_out = enhance(gen, patch);

    double worst = 0.0;
    for (int r = margin; r < p - margin; ++r)
        for (int c = margin; c < p - margin; ++c)
            worst = std::max(worst,
                             std::abs(patch_out.at2(r, c) - enhanced.at2(r0 + r, c0 + c)));
    CHECK(worst < 1e-6);
}

TEST_CASE("shape requirements") {
    GeneratorParams gen = perturbed_generator(9);
    CHECK_THROWS_AS(enhance(gen, Tensor({2, 8})), Error);
    CHECK_THROWS_AS(enhance(gen, Tensor({1, 8, 8})), Error);
}

TEST_CASE("blending") {
    Tensor a = random_image(24, 24, 10);
    Tensor b = random_image(24, 24, 11);

    SUBCASE("endpoints are the inputs, bitwise") {
        CHECK(blend(a, b, 1.0).bitwise_equal(a));
        CHECK(blend(a, b, 0.0).bitwise_equal(b));
    }

    SUBCASE("paper operating point on constants") {
        Tensor ten = Tensor::full({4, 4}, 10.0);
        Tensor twenty = Tensor::full({4, 4}, 20.0);
        Tensor mix = blend(ten, twenty, 0.3);
        for (std::int64_t i = 0; i < mix.size(); ++i) CHECK(mix[i] == 17.0);
    }

    SUBCASE("linear in eta") {
        Tensor lo = blend(a, b, 0.2);
        Tensor hi = blend(a, b, 0.9);
        Tensor mid = blend(a, b, 0.55);
        for (std::int64_t i = 0; i < a.size(); ++i)
            CHECK(lo[i] + hi[i] == doctest::Approx(2.0 * mid[i]).epsilon(1e-12));
    }

    SUBCASE("bounded by the inputs pixelwise") {
        Tensor mix = blend(a, b, 0.37);
        for (std::int64_t i = 0; i < a.size(); ++i) {
            CHECK(mix[i] >= std::min(a[i], b[i]) - 1e-9);
            CHECK(mix[i] <= std::max(a[i], b[i]) + 1e-9);
        }
    }

    SUBCASE("rejections") {
        CHECK_THROWS_AS(blend(a, b, -0.1), Error);
        CHECK_THROWS_AS(blend(a, b, 1.1), Error);
        CHECK_THROWS_AS(blend(a, Tensor({4, 4}), 0.5), Error);
    }
}

TEST_CASE("precision casts") {
    GeneratorParams gen64 = perturbed_generator(12);
    GeneratorParamsT<float> gen32 = cast_generator<float>(gen64);
    GeneratorParams widened = cast_generator<double>(gen32);

    // float -> double is exact, so a float-native value survives the
    // round trip bitwise.
    CHECK(cast_generator<float>(widened).kernels[2].bitwise_equal(gen32.kernels[2]));
    CHECK(widened.arch.depth == gen64.arch.depth);

    TensorT<float> y32({16, 16});
    Rng rng = Rng::stream(13, 0);
    for (std::int64_t i = 0; i < y32.size(); ++i)
        y32[i] = static_cast<float>(1000.0 + 30.0 * rng.gaussian());
    TensorT<float> out32 = enhance(gen32, y32);
    CHECK(out32.finite());

    GammaParamT<float> g32 = cast_gamma<float>(GammaParam{0.25, true});
    CHECK(g32.log_gamma == 0.25f);
    DiscriminatorParamsT<float> d32 =
        cast_discriminator<float>(init_discriminator<double>(225, 3));
    CHECK(d32.widths == init_discriminator<double>(225, 3).widths);
}

}  // TEST_SUITE
