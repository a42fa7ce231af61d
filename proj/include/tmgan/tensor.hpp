#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tmgan/common.hpp"

namespace tmgan {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

inline std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor.  Double in test/oracle mode, float in training
// mode; the two never mix inside one computation.
template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(Shape s) : shape(std::move(s)) {
        validate_shape();
        data.assign(static_cast<std::size_t>(numel(shape)), T(0));
    }

    TensorT(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        validate_shape();
        require(static_cast<std::int64_t>(data.size()) == numel(shape),
                "tensor: data length " + std::to_string(data.size()) +
                    " does not match shape " + shape_to_string(shape));
    }

    static TensorT zeros(Shape s) { return TensorT(std::move(s)); }

    static TensorT full(Shape s, T value) {
        TensorT t(std::move(s));
        for (T& v : t.data) v = value;
        return t;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // 4-D addressing for [N, C, H, W] layouts.
    T& at4(int n, int c, int h, int w) { return data[static_cast<std::size_t>(off4(n, c, h, w))]; }
    const T& at4(int n, int c, int h, int w) const {
        return data[static_cast<std::size_t>(off4(n, c, h, w))];
    }
    std::int64_t off4(int n, int c, int h, int w) const {
        return ((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
    }

    // 2-D addressing for [H, W] images.
    T& at2(int h, int w) { return data[static_cast<std::size_t>(h) * shape[1] + w]; }
    const T& at2(int h, int w) const { return data[static_cast<std::size_t>(h) * shape[1] + w]; }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool bitwise_equal(const TensorT& other) const {
        if (shape != other.shape) return false;
        // memcmp semantics: compare representations, not values (so NaN != NaN
        // does not sneak through and -0.0 differs from +0.0).
        return std::memcmp(data.data(), other.data.data(), data.size() * sizeof(T)) == 0;
    }

    bool finite() const { return all_finite(data.data(), data.size()); }

    void fill(T v) {
        for (T& x : data) x = v;
    }

private:
    void validate_shape() const {
        require(!shape.empty(), "tensor: empty shape");
        for (int d : shape)
            require(d > 0, "tensor: non-positive dimension in " + shape_to_string(shape));
    }
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

template <typename T>
TensorT<T> widen_or_copy(const TensorT<float>& src) {
    TensorT<T> out(src.shape);
    for (std::int64_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
    return out;
}

inline Tensor widen(const TensorF& src) { return widen_or_copy<double>(src); }

}  // namespace tmgan
