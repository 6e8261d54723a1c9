#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "xemap/errors.hpp"
#include "xemap/tensor.hpp"

namespace xemap {

/// H x W scalar field; working range [0,1] after rescaling, stored u8 [0,255].
struct CorrelationMap {
    int width = 0;
    int height = 0;
    std::vector<float> values; // row-major

    CorrelationMap() = default;
    CorrelationMap(int w, int h, float fill = 0.0f)
        : width(w), height(h), values(std::size_t(w) * std::size_t(h), fill) {}

    float at(int x, int y) const { return values[std::size_t(y) * width + x]; }
    float& at(int x, int y) { return values[std::size_t(y) * width + x]; }
    std::size_t size() const { return values.size(); }

    bool same_dims(const CorrelationMap& o) const {
        return width == o.width && height == o.height;
    }
};

inline CorrelationMap map_from_tensor(const TensorF32& t) {
    if (t.shape.size() != 2)
        throw DimensionMismatch("correlation map tensor must be 2-D (H, W)");
    CorrelationMap m(int(t.shape[1]), int(t.shape[0]));
    m.values = t.data;
    return m;
}

inline TensorF32 map_to_tensor(const CorrelationMap& m) {
    return TensorF32({std::size_t(m.height), std::size_t(m.width)}, m.values);
}

/// Stored u8 maps decode as v = u / 255.
inline CorrelationMap dequantize_u8(const TensorU8& t) {
    if (t.shape.size() != 2)
        throw DimensionMismatch("stored map tensor must be 2-D (H, W)");
    CorrelationMap m(int(t.shape[1]), int(t.shape[0]));
    for (std::size_t i = 0; i < t.data.size(); ++i)
        m.values[i] = float(t.data[i]) / 255.0f;
    return m;
}

/// Half-pixel-center bilinear resampling with edge clamping: source coordinate
/// u = (x + 0.5) * W_s / W_t - 0.5, clamped to [0, W_s - 1]. Identity when the
/// dimensions already match; output values stay within [min, max] of the input.
inline CorrelationMap bilinear_upsample(const CorrelationMap& src, int target_w, int target_h) {
    if (src.width < 1 || src.height < 1 || target_w < 1 || target_h < 1)
        throw DimensionMismatch("bilinear_upsample requires positive dims");
    if (src.width == target_w && src.height == target_h)
        return src;

    CorrelationMap out(target_w, target_h);
    const double sx = double(src.width) / double(target_w);
    const double sy = double(src.height) / double(target_h);

    std::vector<int> x0(target_w), x1(target_w);
    std::vector<float> fx(target_w);
    for (int x = 0; x < target_w; ++x) {
        double u = (x + 0.5) * sx - 0.5;
        u = std::clamp(u, 0.0, double(src.width - 1));
        x0[x] = int(std::floor(u));
        x1[x] = std::min(x0[x] + 1, src.width - 1);
        fx[x] = float(u - x0[x]);
    }
    for (int y = 0; y < target_h; ++y) {
        double v = (y + 0.5) * sy - 0.5;
        v = std::clamp(v, 0.0, double(src.height - 1));
        int y0 = int(std::floor(v));
        int y1 = std::min(y0 + 1, src.height - 1);
        float fy = float(v - y0);
        const float* r0 = src.values.data() + std::size_t(y0) * src.width;
        const float* r1 = src.values.data() + std::size_t(y1) * src.width;
        float* dst = out.values.data() + std::size_t(y) * target_w;
        for (int x = 0; x < target_w; ++x) {
            float top = r0[x0[x]] + (r0[x1[x]] - r0[x0[x]]) * fx[x];
            float bot = r1[x0[x]] + (r1[x1[x]] - r1[x0[x]]) * fx[x];
            dst[x] = top + (bot - top) * fy;
        }
    }
    return out;
}

/// Per-pixel arithmetic mean across equally sized maps.
inline CorrelationMap pixelwise_mean(std::span<const CorrelationMap> maps) {
    if (maps.empty())
        throw EmptyInput("no maps to average");
    const CorrelationMap& first = maps[0];
    for (const auto& m : maps)
        if (!m.same_dims(first))
            throw DimensionMismatch("maps differ in dimensions");
    CorrelationMap out(first.width, first.height);
    const double inv = 1.0 / double(maps.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (const auto& m : maps) acc += m.values[i];
        out.values[i] = float(acc * inv);
    }
    return out;
}

} // namespace xemap
