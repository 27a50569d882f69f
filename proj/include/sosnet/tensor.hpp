#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "sosnet/errors.hpp"

namespace sosnet {

// Dense row-major numeric array; holds images, activations and gradients.
// Invariant: data.size() == product(shape).
template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), T(0));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }

    // (c, y, x) accessor for 3-d image-shaped tensors
    T& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    T at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& src) {
    TensorT<To> out;
    out.shape = src.shape;
    out.data.assign(src.data.begin(), src.data.end());
    return out;
}

}  // namespace sosnet
