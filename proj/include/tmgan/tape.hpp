#pragma once

// Define-by-run reverse-mode differentiation over the kernel set in
// kernels.hpp. A TapeT owns every intermediate value of one forward
// computation; backward() replays the recorded operations in exact reverse
// order, accumulating gradients into each node. Leaves marked
// requires_grad are the trainable parameters; everything that never
// participates in the loss simply keeps its zero gradient.
//
// One tape belongs to one logical thread. Ops may parallelize internally
// (see kernels.hpp) but the tape itself is never shared.

#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "tmgan/common.hpp"
#include "tmgan/kernels.hpp"
#include "tmgan/tensor.hpp"

namespace tmgan {

using NodeId = int;

template <typename T>
class TapeT {
public:
    NodeId leaf(TensorT<T> value, bool requires_grad = false) {
        (void)requires_grad;  // recorded for the caller's bookkeeping only
        return new_node(std::move(value));
    }

    const TensorT<T>& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const TensorT<T>& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    int num_ops() const { return static_cast<int>(ops_.size()); }

    // Invoked with the op's record index for every op visited during
    // backward(); lets tests assert the reverse-replay contract.
    void set_backward_visit_hook(std::function<void(int)> hook) { visit_hook_ = std::move(hook); }

    // ---- primitive ops --------------------------------------------------

    NodeId conv2d(NodeId x, NodeId kernel, NodeId bias, int stride, int padding) {
        TensorT<T> out = conv2d_forward(value(x), value(kernel), value(bias), stride, padding);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, kernel, bias, o, stride, padding] {
            const TensorT<T>& g = node(o).grad;
            accumulate(node(x).grad,
                       conv2d_backward_input(g, node(kernel).value, node(x).value.shape, stride,
                                             padding));
            accumulate(node(kernel).grad,
                       conv2d_backward_kernel(g, node(x).value, node(kernel).value.shape, stride,
                                              padding));
            accumulate(node(bias).grad, conv2d_backward_bias(g));
        });
        return o;
    }

    NodeId relu(NodeId x) {
        const NodeId o = new_node(relu_forward(value(x)));
        record(o, [this, x, o] {
            const TensorT<T>& xv = node(x).value;
            const TensorT<T>& g = node(o).grad;
            TensorT<T>& gx = node(x).grad;
            for (std::int64_t i = 0; i < xv.size(); ++i)
                if (xv[i] > T(0)) gx[i] += g[i];
        });
        return o;
    }

    NodeId leaky_relu(NodeId x, T slope) {
        const NodeId o = new_node(leaky_relu_forward(value(x), slope));
        record(o, [this, x, o, slope] {
            const TensorT<T>& xv = node(x).value;
            const TensorT<T>& g = node(o).grad;
            TensorT<T>& gx = node(x).grad;
            for (std::int64_t i = 0; i < xv.size(); ++i)
                gx[i] += (xv[i] > T(0) ? g[i] : slope * g[i]);
        });
        return o;
    }

    NodeId sigmoid(NodeId x) {
        const NodeId o = new_node(sigmoid_forward(value(x)));
        record(o, [this, x, o] {
            const TensorT<T>& p = node(o).value;
            const TensorT<T>& g = node(o).grad;
            TensorT<T>& gx = node(x).grad;
            for (std::int64_t i = 0; i < p.size(); ++i) gx[i] += g[i] * p[i] * (T(1) - p[i]);
        });
        return o;
    }

    // Batch normalization. Running stats live in the parameter store, not
    // on the tape; train mode updates them in place as a side effect of the
    // forward pass (standard running-average bookkeeping).
    NodeId batch_norm(NodeId x, NodeId scale, NodeId shift, bool train_mode,
                      TensorT<T>* running_mean, TensorT<T>* running_var, T epsilon) {
        auto cache = std::make_shared<BatchNormCache<T>>();
        TensorT<T> out =
            batch_norm_forward(value(x), value(scale), value(shift), train_mode, *running_mean,
                               *running_var, epsilon, train_mode ? cache.get() : nullptr);
        const NodeId o = new_node(std::move(out));
        if (train_mode) {
            record(o, [this, x, scale, shift, o, cache] {
                accumulate_bn(node(o).grad, node(scale).value, *cache, node(x).grad,
                              node(scale).grad, node(shift).grad);
            });
        } else {
            // Eval mode: running stats are constants, so the op is affine
            // per channel.
            TensorT<T> rm = *running_mean;
            TensorT<T> rv = *running_var;
            record(o, [this, x, scale, shift, o, rm, rv, epsilon] {
                const TensorT<T>& g = node(o).grad;
                const TensorT<T>& xv = node(x).value;
                const TensorT<T>& sc = node(scale).value;
                const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const T inv_std = T(1) / std::sqrt(rv[c] + epsilon);
                        for (int h = 0; h < H; ++h)
                            for (int w = 0; w < W; ++w) {
                                const T go = g.at4(n, c, h, w);
                                node(x).grad.at4(n, c, h, w) += go * sc[c] * inv_std;
                                node(scale).grad[c] += go * (xv.at4(n, c, h, w) - rm[c]) * inv_std;
                                node(shift).grad[c] += go;
                            }
                    }
            });
        }
        return o;
    }

    NodeId add(NodeId a, NodeId b) {
        check_same_shape(a, b, "add");
        TensorT<T> out(value(a).shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] + value(b)[i];
        const NodeId o = new_node(std::move(out));
        record(o, [this, a, b, o] {
            const TensorT<T>& g = node(o).grad;
            for (std::int64_t i = 0; i < g.size(); ++i) {
                node(a).grad[i] += g[i];
                node(b).grad[i] += g[i];
            }
        });
        return o;
    }

    NodeId sub(NodeId a, NodeId b) {
        check_same_shape(a, b, "sub");
        TensorT<T> out(value(a).shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] - value(b)[i];
        const NodeId o = new_node(std::move(out));
        record(o, [this, a, b, o] {
            const TensorT<T>& g = node(o).grad;
            for (std::int64_t i = 0; i < g.size(); ++i) {
                node(a).grad[i] += g[i];
                node(b).grad[i] -= g[i];
            }
        });
        return o;
    }

    // alpha*a + beta*b with constant coefficients.
    NodeId axpby(T alpha, NodeId a, T beta, NodeId b) {
        check_same_shape(a, b, "axpby");
        TensorT<T> out(value(a).shape);
        for (std::int64_t i = 0; i < out.size(); ++i)
            out[i] = alpha * value(a)[i] + beta * value(b)[i];
        const NodeId o = new_node(std::move(out));
        record(o, [this, a, b, o, alpha, beta] {
            const TensorT<T>& g = node(o).grad;
            for (std::int64_t i = 0; i < g.size(); ++i) {
                node(a).grad[i] += alpha * g[i];
                node(b).grad[i] += beta * g[i];
            }
        });
        return o;
    }

    // a*x + b elementwise with constant scalars.
    NodeId affine(NodeId x, T a, T b) {
        TensorT<T> out(value(x).shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a * value(x)[i] + b;
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o, a] {
            const TensorT<T>& g = node(o).grad;
            for (std::int64_t i = 0; i < g.size(); ++i) node(x).grad[i] += a * g[i];
        });
        return o;
    }

    // x scaled by a scalar node (numel 1); used for the learnable γ.
    NodeId mul_scalar_node(NodeId x, NodeId s) {
        require(value(s).size() == 1, "mul_scalar_node: scale must be a scalar node");
        const T sv = value(s)[0];
        TensorT<T> out(value(x).shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = sv * value(x)[i];
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, s, o, sv] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& xv = node(x).value;
            std::vector<T> prods(static_cast<std::size_t>(g.size()));
            for (std::int64_t i = 0; i < g.size(); ++i) {
                node(x).grad[i] += sv * g[i];
                prods[static_cast<std::size_t>(i)] = g[i] * xv[i];
            }
            node(s).grad[0] += pairwise_sum(prods.data(), g.size());
        });
        return o;
    }

    NodeId exp(NodeId x) {
        TensorT<T> out(value(x).shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(value(x)[i]);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& ev = node(o).value;
            for (std::int64_t i = 0; i < g.size(); ++i) node(x).grad[i] += g[i] * ev[i];
        });
        return o;
    }

    NodeId log(NodeId x) {
        const TensorT<T>& xv = value(x);
        for (std::int64_t i = 0; i < xv.size(); ++i)
            require(xv[i] > T(0), "log: non-positive input");
        TensorT<T> out(xv.shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(xv[i]);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& xval = node(x).value;
            for (std::int64_t i = 0; i < g.size(); ++i) node(x).grad[i] += g[i] / xval[i];
        });
        return o;
    }

    // Clamp to [lo, hi]; gradient passes through strictly inside the range.
    NodeId clamp(NodeId x, T lo, T hi) {
        require(lo < hi, "clamp: lo must be < hi");
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.shape);
        for (std::int64_t i = 0; i < out.size(); ++i)
            out[i] = xv[i] < lo ? lo : (xv[i] > hi ? hi : xv[i]);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o, lo, hi] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& xval = node(x).value;
            for (std::int64_t i = 0; i < g.size(); ++i)
                if (xval[i] > lo && xval[i] < hi) node(x).grad[i] += g[i];
        });
        return o;
    }

    NodeId sum(NodeId x) {
        TensorT<T> out({1});
        out[0] = pairwise_sum(value(x).data.data(), value(x).size());
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o] {
            const T g = node(o).grad[0];
            for (std::int64_t i = 0; i < node(x).grad.size(); ++i) node(x).grad[i] += g;
        });
        return o;
    }

    NodeId mean(NodeId x) {
        const std::int64_t n = value(x).size();
        TensorT<T> out({1});
        out[0] = pairwise_sum(value(x).data.data(), n) / static_cast<T>(n);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o, n] {
            const T g = node(o).grad[0] / static_cast<T>(n);
            for (std::int64_t i = 0; i < node(x).grad.size(); ++i) node(x).grad[i] += g;
        });
        return o;
    }

    NodeId sum_squares(NodeId x) {
        TensorT<T> out({1});
        out[0] = pairwise_sum_squares(value(x).data.data(), value(x).size());
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o] {
            const T g = node(o).grad[0];
            const TensorT<T>& xv = node(x).value;
            for (std::int64_t i = 0; i < xv.size(); ++i) node(x).grad[i] += T(2) * g * xv[i];
        });
        return o;
    }

    NodeId global_avg_pool(NodeId x) {
        const NodeId o = new_node(global_avg_pool_forward(value(x)));
        record(o, [this, x, o] {
            const TensorT<T>& g = node(o).grad;
            TensorT<T>& gx = node(x).grad;
            const int N = gx.dim(0), C = gx.dim(1);
            const std::int64_t plane = static_cast<std::int64_t>(gx.dim(2)) * gx.dim(3);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const T per = g[static_cast<std::int64_t>(n) * C + c] / static_cast<T>(plane);
                    T* base = &gx.data[static_cast<std::size_t>(gx.off4(n, c, 0, 0))];
                    for (std::int64_t i = 0; i < plane; ++i) base[i] += per;
                }
        });
        return o;
    }

    NodeId dense(NodeId x, NodeId weight, NodeId bias) {
        const NodeId o = new_node(dense_forward(value(x), value(weight), value(bias)));
        record(o, [this, x, weight, bias, o] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& xv = node(x).value;
            const TensorT<T>& wv = node(weight).value;
            const int N = xv.dim(0), F = xv.dim(1), O = wv.dim(0);
            for (int n = 0; n < N; ++n)
                for (int oo = 0; oo < O; ++oo) {
                    const T go = g[static_cast<std::int64_t>(n) * O + oo];
                    node(bias).grad[oo] += go;
                    for (int f = 0; f < F; ++f) {
                        node(x).grad[static_cast<std::int64_t>(n) * F + f] +=
                            go * wv[static_cast<std::int64_t>(oo) * F + f];
                        node(weight).grad[static_cast<std::int64_t>(oo) * F + f] +=
                            go * xv[static_cast<std::int64_t>(n) * F + f];
                    }
                }
        });
        return o;
    }

    // Elementwise op with caller-supplied forward and derivative rules.
    // Exists so tests can register a deliberately wrong derivative and
    // confirm the finite-difference checker catches it.
    NodeId custom_unary(NodeId x, std::function<T(T)> fwd, std::function<T(T)> deriv) {
        const TensorT<T>& xv = value(x);
        TensorT<T> out(xv.shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
        const NodeId o = new_node(std::move(out));
        record(o, [this, x, o, deriv] {
            const TensorT<T>& g = node(o).grad;
            const TensorT<T>& xval = node(x).value;
            for (std::int64_t i = 0; i < g.size(); ++i) node(x).grad[i] += g[i] * deriv(xval[i]);
        });
        return o;
    }

    // ---- backward -------------------------------------------------------

    void backward(NodeId loss) {
        require(value(loss).size() == 1,
                "backward: loss must be scalar, got " + shape_to_string(value(loss).shape));
        for (auto& n : nodes_) n.grad.fill(T(0));
        nodes_[static_cast<std::size_t>(loss)].grad[0] = T(1);
        for (std::size_t i = ops_.size(); i-- > 0;) {
            if (visit_hook_) visit_hook_(static_cast<int>(i));
            ops_[i].backprop();
        }
    }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
    };
    struct Op {
        NodeId out;
        std::function<void()> backprop;
    };

    // deque: stable addresses under growth, so value()/grad() references
    // held by callers stay valid as more ops are recorded.
    std::deque<Node> nodes_;
    std::vector<Op> ops_;
    std::function<void(int)> visit_hook_;

    Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    NodeId new_node(TensorT<T> value) {
        Node n;
        n.grad = TensorT<T>(value.shape);
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void record(NodeId out, std::function<void()> backprop) {
        ops_.push_back(Op{out, std::move(backprop)});
    }

    void check_same_shape(NodeId a, NodeId b, const char* op) {
        require(value(a).same_shape(value(b)),
                std::string(op) + ": shape mismatch " + shape_to_string(value(a).shape) + " vs " +
                    shape_to_string(value(b).shape));
    }

    static void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
        for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    static void accumulate_bn(const TensorT<T>& grad_out, const TensorT<T>& scale,
                              const BatchNormCache<T>& cache, TensorT<T>& grad_x,
                              TensorT<T>& grad_scale, TensorT<T>& grad_shift) {
        TensorT<T> gx = batch_norm_backward(grad_out, scale, cache, grad_scale, grad_shift);
        accumulate(grad_x, gx);
    }
};

using Tape = TapeT<double>;
using TapeF = TapeT<float>;

}  // namespace tmgan
