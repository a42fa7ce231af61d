#include <doctest.h>

#include <cmath>

#include "tmgan/adam.hpp"
#include "tmgan/losses.hpp"
#include "tmgan/models.hpp"
#include "tmgan/rng.hpp"

using namespace tmgan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

// Analytic parameter count for the generator layout: first 1->W, then
// (D-2) W->W hidden layers, then W->1, all 3x3 with biases.
std::int64_t expected_gen_count(int D, int W) {
    return (static_cast<std::int64_t>(W) * 9 + W) +
           static_cast<std::int64_t>(D - 2) * (static_cast<std::int64_t>(W) * W * 9 + W) +
           (static_cast<std::int64_t>(W) * 9 + 1);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("fresh generator is exactly the identity") {
    GeneratorParams gen = init_generator<double>({5, 8, false}, 101);
    Rng rng = Rng::stream(1, 0);
    Tensor y = random_tensor({2, 1, 12, 12}, rng, 50.0);
    Tensor out = generator_apply(gen, y);
    CHECK(out.bitwise_equal(y));
}

TEST_CASE("parameter counts follow the architecture arithmetic") {
    // Paper-scale configuration: D=17, 64 channels, no normalization.
    GeneratorParams paper = init_generator<double>({17, 64, false}, 1);
    CHECK(paper.param_count() == expected_gen_count(17, 64));
    CHECK(paper.param_count() == 555137);

    // Desk-scale default.
    GeneratorParams desk = init_generator<double>({7, 32, false}, 1);
    CHECK(desk.param_count() == expected_gen_count(7, 32));
    CHECK(desk.param_count() == 46849);

    // Batch norm adds scale+shift per middle layer.
    GeneratorParams bn = init_generator<double>({7, 32, true}, 1);
    CHECK(bn.param_count() == 46849 + 5 * 2 * 32);
}

TEST_CASE("generator keeps shape and produces finite values") {
    GeneratorParams gen = init_generator<double>({7, 16, false}, 55);
    Rng rng = Rng::stream(2, 0);
    Tensor y = random_tensor({2, 1, 32, 32}, rng, 100.0);
    Tensor out = generator_apply(gen, y);
    CHECK(out.shape == Shape{2, 1, 32, 32});
    CHECK(out.finite());

    Tensor bad({2, 3, 32, 32});
    CHECK_THROWS_AS(generator_apply(gen, bad), Error);
}

TEST_CASE("siamese branches share weights") {
    GeneratorParams gen = init_generator<double>({5, 8, false}, 7);
    // Give the final layer nonzero weights so the network is not the identity.
    Rng rng = Rng::stream(3, 0);
    for (std::int64_t i = 0; i < gen.kernels.back().size(); ++i)
        gen.kernels.back()[i] = 0.05 * rng.gaussian();
    GammaParam gamma;

    Tensor y1 = random_tensor({1, 1, 10, 10}, rng, 10.0);
    Tensor y2 = random_tensor({1, 1, 10, 10}, rng, 10.0);

    Tape tape;
    StagedGenerator<double> staged = stage_generator(tape, gen, gamma);
    auto [a1, a2] = siamese_forward(tape, staged, tape.leaf(y1), tape.leaf(y2));

    SUBCASE("identical inputs give bitwise identical outputs") {
        Tape t2;
        StagedGenerator<double> s2 = stage_generator(t2, gen, gamma);
        auto [b1, b2] = siamese_forward(t2, s2, t2.leaf(y1), t2.leaf(y1));
        CHECK(t2.value(b1).bitwise_equal(t2.value(b2)));
    }

    SUBCASE("swapping the inputs swaps the outputs") {
        Tape t2;
        StagedGenerator<double> s2 = stage_generator(t2, gen, gamma);
        auto [b1, b2] = siamese_forward(t2, s2, t2.leaf(y2), t2.leaf(y1));
        CHECK(t2.value(b1).bitwise_equal(tape.value(a2)));
        CHECK(t2.value(b2).bitwise_equal(tape.value(a1)));
    }

    SUBCASE("mutating the single store changes both branches identically") {
        GeneratorParams mutated = gen;
        mutated.kernels[1][0] += 0.25;
        Tensor m1 = generator_apply(mutated, y1);
        Tensor m2 = generator_apply(mutated, y1);
        CHECK(m1.bitwise_equal(m2));
        CHECK_FALSE(m1.bitwise_equal(generator_apply(gen, y1)));
    }

    SUBCASE("mismatched branch shapes are rejected") {
        Tape t2;
        StagedGenerator<double> s2 = stage_generator(t2, gen, gamma);
        NodeId small = t2.leaf(Tensor({1, 1, 8, 8}));
        NodeId big = t2.leaf(Tensor({1, 1, 10, 10}));
        CHECK_THROWS_AS(siamese_forward(t2, s2, small, big), Error);
    }
}

TEST_CASE("gradients from both branches accumulate into the shared parameters") {
    GeneratorParams gen = init_generator<double>({4, 4, false}, 11);
    Rng rng = Rng::stream(5, 0);
    for (std::int64_t i = 0; i < gen.kernels.back().size(); ++i)
        gen.kernels.back()[i] = 0.1 * rng.gaussian();
    GammaParam gamma;
    Tensor y1 = random_tensor({1, 1, 8, 8}, rng);
    Tensor y2 = random_tensor({1, 1, 8, 8}, rng);

    // Combined loss: sum of both branch outputs.
    Tape both;
    StagedGenerator<double> sb = stage_generator(both, gen, gamma);
    auto [o1, o2] = siamese_forward(both, sb, both.leaf(y1), both.leaf(y2));
    both.backward(both.add(both.sum(o1), both.sum(o2)));

    // Each branch separately.
    Tape first;
    StagedGenerator<double> sf = stage_generator(first, gen, gamma);
    first.backward(first.sum(generator_forward(first, sf, first.leaf(y1))));
    Tape second;
    StagedGenerator<double> ss = stage_generator(second, gen, gamma);
    second.backward(second.sum(generator_forward(second, ss, second.leaf(y2))));

    for (std::size_t k = 0; k < sb.kernels.size(); ++k) {
        const Tensor& g_both = both.grad(sb.kernels[k]);
        const Tensor& g_1 = first.grad(sf.kernels[k]);
        const Tensor& g_2 = second.grad(ss.kernels[k]);
        for (std::int64_t i = 0; i < g_both.size(); ++i)
            CHECK(g_both[i] == doctest::Approx(g_1[i] + g_2[i]).epsilon(1e-12));
    }
}

TEST_CASE("discriminator outputs stay strictly inside (0,1)") {
    DiscriminatorParams disc = init_discriminator<double>(46849, 21);
    // Push the head away from zero so outputs are not all 0.5.
    Rng rng = Rng::stream(6, 0);
    for (std::int64_t i = 0; i < disc.dense_weight.size(); ++i)
        disc.dense_weight[i] = rng.gaussian();
    Tensor wild = random_tensor({3, 1, 16, 16}, rng, 500.0);
    Tensor p = discriminator_apply(disc, wild);
    CHECK(p.shape == Shape{3});
    for (std::int64_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(p[i] < 1.0);
    }
}

TEST_CASE("zero-initialized head reports exactly one half") {
    DiscriminatorParams disc = init_discriminator<double>(46849, 33);
    Rng rng = Rng::stream(7, 0);
    Tensor delta = random_tensor({4, 1, 16, 16}, rng, 30.0);
    Tensor p = discriminator_apply(disc, delta);
    for (std::int64_t i = 0; i < p.size(); ++i) CHECK(p[i] == 0.5);
}

TEST_CASE("discriminator strength matches the generator within a factor of two") {
    for (std::int64_t gen_count : {std::int64_t(1905), std::int64_t(46849), std::int64_t(555137)}) {
        std::vector<int> w = discriminator_widths_for(gen_count);
        const std::int64_t count = discriminator_count_for_widths(w);
        CHECK(count * 2 >= gen_count);
        CHECK(count <= gen_count * 2);
    }
    // Spot-check the desk-scale ladder: 32/64/128/256 scaled by 11/32.
    std::vector<int> desk = discriminator_widths_for(46849);
    CHECK(desk == std::vector<int>{11, 22, 44, 88});
    DiscriminatorParams p = init_discriminator<double>(46849, 3);
    CHECK(p.param_count() == discriminator_count_for_widths(desk));
}

TEST_CASE("gamma stays positive through optimizer pressure") {
    GammaParam gamma;
    CHECK(gamma.gamma() == 1.0);
    Tensor lg({1}, {gamma.log_gamma});
    AdamState st = AdamState::for_params({&lg});
    // Relentless downward gradient: log-gamma dives, gamma approaches zero
    // but never reaches it.
    for (int i = 0; i < 500; ++i) {
        Tensor g({1}, {1.0});
        adam_step<double>({&lg}, {&g}, st, 0.05);
    }
    gamma.log_gamma = lg[0];
    CHECK(gamma.gamma() > 0.0);
    CHECK(gamma.gamma() < 1.0);
}

TEST_CASE("discriminator learns to separate easy texture classes") {
    // Real: strongly low-pass (smooth) fields. Fake: white noise. A tiny
    // discriminator should reach confident separation in a few hundred
    // steps.
    const int patch = 16, K = 16;
    DiscriminatorParams disc = init_discriminator<double>(1905, 91);
    AdamState st;
    {
        auto params = disc.trainable();
        st = AdamState::for_params(params);
    }

    Rng data_rng = Rng::stream(1234, stream_key("disc_sep"));
    auto draw_batch = [&](bool smooth) {
        Tensor batch({K, 1, patch, patch});
        for (int k = 0; k < K; ++k) {
            if (smooth) {
                // White noise heavily box-filtered: almost flat per patch.
                Tensor white({patch + 8, patch + 8});
                for (std::int64_t i = 0; i < white.size(); ++i) white[i] = data_rng.gaussian();
                for (int h = 0; h < patch; ++h)
                    for (int w = 0; w < patch; ++w) {
                        double acc = 0.0;
                        for (int dh = 0; dh < 9; ++dh)
                            for (int dw = 0; dw < 9; ++dw) acc += white.at2(h + dh, w + dw);
                        batch.at4(k, 0, h, w) = acc / 9.0;  // keeps std near 1
                    }
            } else {
                for (int h = 0; h < patch; ++h)
                    for (int w = 0; w < patch; ++w) batch.at4(k, 0, h, w) = data_rng.gaussian();
            }
        }
        return batch;
    };

    for (int step = 0; step < 300; ++step) {
        Tape tape;
        StagedDiscriminator<double> staged = stage_discriminator(tape, disc);
        NodeId loss = discriminator_loss_node(tape, staged, tape.leaf(draw_batch(true)),
                                              tape.leaf(draw_batch(false)));
        tape.backward(loss);
        auto params = disc.trainable();
        std::vector<const Tensor*> grads;
        for (std::size_t i = 0; i < params.size(); ++i)
            grads.push_back(&tape.grad(staged.trainable[i]));
        adam_step<double>(params, grads, st, 1e-3);
    }

    double mean_real = 0.0, mean_fake = 0.0;
    const int eval_batches = 4;
    for (int i = 0; i < eval_batches; ++i) {
        Tensor pr = discriminator_apply(disc, draw_batch(true));
        Tensor pf = discriminator_apply(disc, draw_batch(false));
        for (int k = 0; k < K; ++k) {
            mean_real += pr[k];
            mean_fake += pf[k];
        }
    }
    mean_real /= eval_batches * K;
    mean_fake /= eval_batches * K;
    CHECK(mean_real > 0.9);
    CHECK(mean_fake < 0.1);
}

}  // TEST_SUITE
