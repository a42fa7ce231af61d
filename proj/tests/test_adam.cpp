#include <doctest.h>

#include <cmath>

#include "tmgan/adam.hpp"
#include "tmgan/rng.hpp"

using namespace tmgan;

TEST_SUITE("adam") {

TEST_CASE("zero gradient leaves parameters unchanged from a fresh state") {
    // Holds whenever the first moment is zero (fresh state or one that has
    // only ever seen zero gradients); a nonzero first moment would keep
    // coasting, as standard Adam does.
    Tensor p({3}, {1.0, -2.0, 0.5});
    Tensor p_before = p;
    Tensor g({3});
    AdamState st = AdamState::for_params({&p});

    for (int i = 0; i < 5; ++i) adam_step<double>({&p}, {&g}, st, 0.1);
    CHECK(p.bitwise_equal(p_before));
    CHECK(st.step == 5);

    // Same with a nonzero second moment: sqrt(v_hat) shifts the
    // denominator but the numerator stays exactly zero.
    st.second_moment[0].fill(0.37);
    adam_step<double>({&p}, {&g}, st, 0.1);
    CHECK(p.bitwise_equal(p_before));
}

TEST_CASE("first step moves each coordinate by about -lr * sign(g)") {
    Tensor p({2}, {0.0, 0.0});
    Tensor g({2}, {0.7, -1234.5});
    AdamState st = AdamState::for_params({&p});
    const double lr = 0.01;
    adam_step<double>({&p}, {&g}, st, lr);
    // With bias correction the first update is lr * g / (|g| + eps').
    CHECK(p[0] == doctest::Approx(-lr).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(lr).epsilon(1e-6));
    CHECK(st.step == 1);
}

TEST_CASE("two hand-computed steps match the textbook recurrence") {
    Tensor p({1}, {1.0});
    AdamState st = AdamState::for_params({&p});
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    double m = 0.0, v = 0.0, ref = 1.0;
    const double grads[2] = {0.4, -0.3};
    for (int t = 1; t <= 2; ++t) {
        Tensor g({1}, {grads[t - 1]});
        adam_step<double>({&p}, {&g}, st, lr, b1, b2, eps);
        m = b1 * m + (1 - b1) * grads[t - 1];
        v = b2 * v + (1 - b2) * grads[t - 1] * grads[t - 1];
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        ref -= lr * mh / (std::sqrt(vh) + eps);
        CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("200 steps on (p-3)^2 converge near the minimum") {
    Tensor p({1}, {0.0});
    AdamState st = AdamState::for_params({&p});
    for (int i = 0; i < 200; ++i) {
        Tensor g({1}, {2.0 * (p[0] - 3.0)});
        adam_step<double>({&p}, {&g}, st, 0.1);
    }
    CHECK(std::abs(p[0] - 3.0) < 0.05);
}

TEST_CASE("non-finite gradients are rejected and state stays untouched") {
    Tensor p({2}, {1.0, 2.0});
    AdamState st = AdamState::for_params({&p});
    Tensor good({2}, {0.1, 0.2});
    adam_step<double>({&p}, {&good}, st, 0.05);
    const Tensor p_snapshot = p;
    const Tensor m_snapshot = st.first_moment[0];
    const auto step_snapshot = st.step;

    Tensor bad({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS((adam_step<double>({&p}, {&bad}, st, 0.05)), Error);
    CHECK(p.bitwise_equal(p_snapshot));
    CHECK(st.first_moment[0].bitwise_equal(m_snapshot));
    CHECK(st.step == step_snapshot);
}

TEST_CASE("shape and count mismatches are rejected") {
    Tensor p({2});
    Tensor g3({3});
    AdamState st = AdamState::for_params({&p});
    CHECK_THROWS_AS((adam_step<double>({&p}, {&g3}, st, 0.1)), Error);

    Tensor q({2});
    Tensor g2({2});
    CHECK_THROWS_AS((adam_step<double>({&p, &q}, {&g2, &g2}, st, 0.1)), Error);
    CHECK_THROWS_AS((adam_step<double>({&p}, {&g2}, st, -0.1)), Error);
}

TEST_CASE("float instantiation converges too") {
    TensorF p({1}, {0.0f});
    AdamStateT<float> st = AdamStateT<float>::for_params({&p});
    for (int i = 0; i < 200; ++i) {
        TensorF g({1}, {2.0f * (p[0] - 3.0f)});
        adam_step<float>({&p}, {&g}, st, 0.1f);
    }
    CHECK(std::abs(p[0] - 3.0f) < 0.05f);
}

}  // TEST_SUITE
