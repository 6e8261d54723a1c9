#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "xemap/errors.hpp"

namespace xemap {

/// Product of extents with overflow detection. An empty shape is a scalar
/// (one element); extents must be >= 1.
inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0)
            throw ShapeOverflow("zero extent in shape");
        if (e > std::numeric_limits<std::size_t>::max() / n)
            throw ShapeOverflow("extent product overflows");
        n *= e;
    }
    return n;
}

/// Dense row-major float32 tensor (last axis fastest).
struct TensorF32 {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    TensorF32() = default;
    TensorF32(std::vector<std::size_t> s, std::vector<float> d)
        : shape(std::move(s)), data(std::move(d)) {}

    static TensorF32 zeros(std::vector<std::size_t> s) {
        std::size_t n = shape_numel(s);
        return TensorF32(std::move(s), std::vector<float>(n, 0.0f));
    }

    std::size_t numel() const { return shape_numel(shape); }

    void validate() const {
        if (data.size() != numel())
            throw ShapeOverflow("data length " + std::to_string(data.size()) +
                                " does not match shape product " + std::to_string(numel()));
        for (float v : data)
            if (!std::isfinite(v))
                throw NonFiniteValue("tensor contains NaN or Inf");
    }

    bool operator==(const TensorF32& o) const { return shape == o.shape && data == o.data; }
};

/// Dense row-major uint8 tensor.
struct TensorU8 {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data;

    TensorU8() = default;
    TensorU8(std::vector<std::size_t> s, std::vector<std::uint8_t> d)
        : shape(std::move(s)), data(std::move(d)) {}

    static TensorU8 zeros(std::vector<std::size_t> s) {
        std::size_t n = shape_numel(s);
        return TensorU8(std::move(s), std::vector<std::uint8_t>(n, 0));
    }

    std::size_t numel() const { return shape_numel(shape); }

    void validate() const {
        if (data.size() != numel())
            throw ShapeOverflow("data length " + std::to_string(data.size()) +
                                " does not match shape product " + std::to_string(numel()));
    }

    bool operator==(const TensorU8& o) const { return shape == o.shape && data == o.data; }
};

} // namespace xemap
