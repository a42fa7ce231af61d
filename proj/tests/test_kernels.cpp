#include <doctest.h>

#include <cmath>

#include "tmgan/kernels.hpp"
#include "tmgan/reference_kernels.hpp"
#include "tmgan/rng.hpp"

using namespace tmgan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("conv2d: all-ones 3x3 against all-ones kernel gives 9") {
    Tensor in = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor b({1});
    Tensor out = conv2d_forward(in, k, b, 1, 0);
    CHECK(out.shape == Shape{1, 1, 1, 1});
    CHECK(out[0] == 9.0);
}

TEST_CASE("conv2d: centred identity kernel reproduces the input") {
    Rng rng = Rng::stream(7, 0);
    Tensor in = random_tensor({2, 3, 6, 5}, rng);
    Tensor k({3, 3, 3, 3});
    for (int c = 0; c < 3; ++c) k.at4(c, c, 1, 1) = 1.0;
    Tensor b({3});
    Tensor out = conv2d_forward(in, k, b, 1, 1);
    CHECK(out.bitwise_equal(in));
}

TEST_CASE("conv2d: matches the six-loop reference on the spec shape") {
    Rng rng = Rng::stream(11, 0);
    Tensor in = random_tensor({2, 3, 8, 8}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor fast = conv2d_forward(in, k, b, 2, 1);
    Tensor ref = conv2d_forward_serial(in, k, b, 2, 1);
    REQUIRE(fast.same_shape(ref));
    for (std::int64_t i = 0; i < fast.size(); ++i) {
        const double denom = std::max(std::abs(ref[i]), 1e-30);
        CHECK(std::abs(fast[i] - ref[i]) / denom < 1e-12);
    }
    // Same accumulation order in both implementations: agreement is exact,
    // not merely within tolerance.
    CHECK(fast.bitwise_equal(ref));
}

TEST_CASE("conv2d: randomized shape grid agrees with the reference") {
    Rng rng = Rng::stream(13, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const int N = static_cast<int>(rng.uniform_int(1, 4));
        const int Ci = static_cast<int>(rng.uniform_int(1, 4));
        const int Co = static_cast<int>(rng.uniform_int(1, 4));
        const int k = static_cast<int>(2 * rng.uniform_int(0, 2) + 1);  // 1, 3, 5
        const int H = static_cast<int>(rng.uniform_int(k, 16));
        const int W = static_cast<int>(rng.uniform_int(k, 16));
        const int stride = static_cast<int>(rng.uniform_int(1, 2));
        const int padding = static_cast<int>(rng.uniform_int(0, 2));
        Tensor in = random_tensor({N, Ci, H, W}, rng);
        Tensor kk = random_tensor({Co, Ci, k, k}, rng);
        Tensor b = random_tensor({Co}, rng);
        Tensor fast = conv2d_forward(in, kk, b, stride, padding);
        Tensor ref = conv2d_forward_serial(in, kk, b, stride, padding);
        REQUIRE(fast.bitwise_equal(ref));
    }
}

TEST_CASE("conv2d: shape mismatches are rejected, not broadcast") {
    Tensor in({1, 2, 8, 8});
    Tensor k({4, 3, 3, 3});
    Tensor b({4});
    CHECK_THROWS_AS(conv2d_forward(in, k, b, 1, 1), Error);

    Tensor k2({4, 2, 3, 3});
    Tensor b_bad({3});
    CHECK_THROWS_AS(conv2d_forward(in, k2, b_bad, 1, 1), Error);

    Tensor huge_k({1, 2, 11, 11});
    Tensor b1({1});
    CHECK_THROWS_AS(conv2d_forward(in, huge_k, b1, 1, 1), Error);
    // ... but a kernel that only fits thanks to padding is fine.
    CHECK_NOTHROW(conv2d_forward(in, huge_k, b1, 1, 2));
}

TEST_CASE("activations: spec examples") {
    Tensor x({3}, {-1.0, 0.0, 2.0});
    Tensor r = relu_forward(x);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);

    Tensor s({1}, {0.0});
    CHECK(sigmoid_forward(s)[0] == 0.5);

    Tensor l({2}, {-5.0, 5.0});
    Tensor lr = leaky_relu_forward(l, 0.2);
    CHECK(lr[0] == doctest::Approx(-1.0));
    CHECK(lr[1] == 5.0);

    CHECK_THROWS_AS(leaky_relu_forward(l, 1.5), Error);
    CHECK_THROWS_AS(leaky_relu_forward(l, 0.0), Error);
}

TEST_CASE("sigmoid stays strictly inside (0,1) even when saturated") {
    Tensor x({4}, {-800.0, -40.0, 40.0, 800.0});
    Tensor p = sigmoid_forward(x);
    for (std::int64_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(p[i] < 1.0);
    }
}

TEST_CASE("activations reject non-finite input") {
    Tensor x({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(relu_forward(x), Error);
    CHECK_THROWS_AS(sigmoid_forward(x), Error);
    CHECK_THROWS_AS(leaky_relu_forward(x, 0.2), Error);
}

TEST_CASE("batch_norm: constant channel collapses to the shift") {
    Tensor x = Tensor::full({2, 1, 2, 2}, 5.0);
    Tensor scale = Tensor::full({1}, 1.0);
    Tensor shift({1});
    Tensor rm({1}), rv({1});
    Tensor out = batch_norm_forward(x, scale, shift, true, rm, rv, 1e-5);
    for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("batch_norm: normalized input passes through scale and shift") {
    // Per-channel mean 0, variance 1 by construction.
    Tensor x({1, 1, 2, 2}, {1.0, -1.0, 1.0, -1.0});
    Tensor scale = Tensor::full({1}, 2.0);
    Tensor shift = Tensor::full({1}, 3.0);
    Tensor rm({1}), rv({1});
    Tensor out = batch_norm_forward(x, scale, shift, true, rm, rv, 1e-10);
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(2.0 * x[i] + 3.0).epsilon(1e-6));
}

TEST_CASE("batch_norm: train mode produces unit statistics") {
    Rng rng = Rng::stream(17, 0);
    Tensor x = random_tensor({4, 3, 8, 8}, rng, 3.0);
    Tensor scale = Tensor::full({3}, 1.0);
    Tensor shift({3});
    Tensor rm({3}), rv({3});
    Tensor out = batch_norm_forward(x, scale, shift, true, rm, rv, 1e-12);
    const int per_channel = 4 * 8 * 8;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 8; ++h)
                for (int w = 0; w < 8; ++w) mean += out.at4(n, c, h, w);
        mean /= per_channel;
        for (int n = 0; n < 4; ++n)
            for (int h = 0; h < 8; ++h)
                for (int w = 0; w < 8; ++w) var += (out.at4(n, c, h, w) - mean) * (out.at4(n, c, h, w) - mean);
        var /= per_channel;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batch_norm: single element in train mode is rejected") {
    Tensor x({1, 2, 1, 1});
    Tensor scale = Tensor::full({2}, 1.0);
    Tensor shift({2});
    Tensor rm({2}), rv({2});
    CHECK_THROWS_AS(batch_norm_forward(x, scale, shift, true, rm, rv, 1e-5), Error);
    // Eval mode with stored stats is fine for single elements.
    rv.fill(1.0);
    CHECK_NOTHROW(batch_norm_forward(x, scale, shift, false, rm, rv, 1e-5));
}

TEST_CASE("pairwise reductions match plain sums") {
    Rng rng = Rng::stream(23, 0);
    std::vector<double> v(1023);
    long double direct = 0.0L, direct_sq = 0.0L;
    for (double& x : v) {
        x = rng.gaussian();
        direct += x;
        direct_sq += x * x;
    }
    CHECK(pairwise_sum(v.data(), static_cast<std::int64_t>(v.size())) ==
          doctest::Approx(static_cast<double>(direct)).epsilon(1e-12));
    CHECK(pairwise_sum_squares(v.data(), static_cast<std::int64_t>(v.size())) ==
          doctest::Approx(static_cast<double>(direct_sq)).epsilon(1e-12));
}

TEST_CASE("dense and global_avg_pool basics") {
    Tensor x({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    Tensor w({1, 3}, {1.0, 0.5, -1.0});
    Tensor b({1}, {0.25});
    Tensor out = dense_forward(x, w, b);
    CHECK(out.shape == Shape{2, 1});
    CHECK(out[0] == doctest::Approx(1.0 + 1.0 - 3.0 + 0.25));
    CHECK(out[1] == doctest::Approx(4.0 + 2.5 - 6.0 + 0.25));
    CHECK_THROWS_AS(dense_forward(x, Tensor({1, 4}), b), Error);

    Tensor img({1, 2, 2, 2}, {1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 10.0, 10.0});
    Tensor pooled = global_avg_pool_forward(img);
    CHECK(pooled[0] == doctest::Approx(2.5));
    CHECK(pooled[1] == 10.0);
    CHECK(pooled.bitwise_equal(global_avg_pool_forward_serial(img)));
}

}  // TEST_SUITE
