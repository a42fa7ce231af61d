#include <doctest.h>

#include "tmgan/gradcheck.hpp"
#include "tmgan/rng.hpp"
#include "tmgan/tape.hpp"

using namespace tmgan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.gaussian();
    return t;
}

// Small three-conv-layer residual network, used as the "toy generator"
// for end-to-end gradient checking: loss = sum of squares of (y - net(y)).
double toy_net_loss(Tape* tape_out, const std::vector<Tensor>& params, const Tensor& input,
                    std::vector<NodeId>* leaves_out) {
    Tape local;
    Tape& tape = tape_out ? *tape_out : local;
    std::vector<NodeId> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));

    NodeId y = tape.leaf(input);
    NodeId h1 = tape.relu(tape.conv2d(y, leaves[0], leaves[1], 1, 1));
    NodeId h2 = tape.relu(tape.conv2d(h1, leaves[2], leaves[3], 1, 1));
    NodeId r = tape.conv2d(h2, leaves[4], leaves[5], 1, 1);
    NodeId xhat = tape.sub(y, r);
    NodeId loss = tape.sum_squares(xhat);
    if (leaves_out) *leaves_out = leaves;
    if (tape_out) tape.backward(loss);
    return tape.value(loss)[0];
}

GradCheckable make_toy_checkable(const Tensor& input) {
    GradCheckable fn;
    fn.eval = [input](const std::vector<Tensor>& params) {
        return toy_net_loss(nullptr, params, input, nullptr);
    };
    fn.grads = [input](const std::vector<Tensor>& params) {
        Tape tape;
        std::vector<NodeId> leaves;
        toy_net_loss(&tape, params, input, &leaves);
        std::vector<Tensor> g;
        for (NodeId id : leaves) g.push_back(tape.grad(id));
        return g;
    };
    return fn;
}

std::vector<Tensor> make_toy_params(Rng& rng) {
    // 1 -> 4 -> 4 -> 1 channels, all 3x3.
    return {random_tensor({4, 1, 3, 3}, rng, 0.3), random_tensor({4}, rng, 0.1),
            random_tensor({4, 4, 3, 3}, rng, 0.3), random_tensor({4}, rng, 0.1),
            random_tensor({1, 4, 3, 3}, rng, 0.3), random_tensor({1}, rng, 0.1)};
}

}  // namespace

TEST_SUITE("gradcheck") {

TEST_CASE("linear function checks out to 1e-10") {
    GradCheckable fn;
    fn.eval = [](const std::vector<Tensor>& p) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < p[0].size(); ++i) acc += 3.0 * p[0][i];
        return acc;
    };
    fn.grads = [](const std::vector<Tensor>& p) {
        return std::vector<Tensor>{Tensor::full(p[0].shape, 3.0)};
    };
    Rng rng = Rng::stream(31, 0);
    GradCheckReport rep = finite_diff_check(fn, {random_tensor({10}, rng)}, 50, 1e-5, 1e-10);
    CHECK(rep.pass);
    CHECK(rep.max_rel_error < 1e-10);
    CHECK(rep.probes == 50);
}

TEST_CASE("toy generator loss agrees with central differences") {
    Rng rng = Rng::stream(37, 0);
    const Tensor input = random_tensor({2, 1, 6, 6}, rng);
    GradCheckReport rep =
        finite_diff_check(make_toy_checkable(input), make_toy_params(rng), 60, 1e-5, 1e-4);
    CHECK(rep.pass);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("a corrupted backward rule is caught") {
    Rng rng = Rng::stream(41, 0);
    const Tensor input = random_tensor({4}, rng);

    auto build = [&input](bool corrupt, const std::vector<Tensor>& params, Tape& tape,
                          std::vector<NodeId>& leaves) {
        leaves.clear();
        leaves.push_back(tape.leaf(params[0], true));
        // Forward rule: cube each element. Correct derivative 3x^2; the
        // corrupted variant claims 2x^2.
        NodeId cubed = tape.custom_unary(
            leaves[0], [](double x) { return x * x * x; },
            corrupt ? std::function<double(double)>([](double x) { return 2.0 * x * x; })
                    : std::function<double(double)>([](double x) { return 3.0 * x * x; }));
        NodeId shifted = tape.sub(cubed, tape.leaf(input));
        return tape.sum_squares(shifted);
    };

    for (bool corrupt : {false, true}) {
        GradCheckable fn;
        fn.eval = [&](const std::vector<Tensor>& params) {
            Tape tape;
            std::vector<NodeId> leaves;
            NodeId loss = build(corrupt, params, tape, leaves);
            return tape.value(loss)[0];
        };
        fn.grads = [&](const std::vector<Tensor>& params) {
            Tape tape;
            std::vector<NodeId> leaves;
            NodeId loss = build(corrupt, params, tape, leaves);
            tape.backward(loss);
            return std::vector<Tensor>{tape.grad(leaves[0])};
        };
        Rng prng = Rng::stream(43, 0);
        GradCheckReport rep =
            finite_diff_check(fn, {random_tensor({4}, prng, 1.0)}, 50, 1e-5, 1e-4);
        if (corrupt)
            CHECK_FALSE(rep.pass);
        else
            CHECK(rep.pass);
    }
}

TEST_CASE("invalid probe parameters are rejected") {
    GradCheckable fn;
    fn.eval = [](const std::vector<Tensor>&) { return 0.0; };
    fn.grads = [](const std::vector<Tensor>& p) {
        return std::vector<Tensor>{Tensor(p[0].shape)};
    };
    std::vector<Tensor> params{Tensor({2})};
    CHECK_THROWS_AS(finite_diff_check(fn, params, 0, 1e-5, 1e-4), Error);
    CHECK_THROWS_AS(finite_diff_check(fn, params, 10, 0.0, 1e-4), Error);
}

}  // TEST_SUITE
