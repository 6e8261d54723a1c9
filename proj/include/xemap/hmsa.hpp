#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "xemap/errors.hpp"
#include "xemap/fusion.hpp"
#include "xemap/map.hpp"
#include "xemap/tensor.hpp"

namespace xemap {

/// Unit-normalize; the zero vector maps to itself.
inline std::vector<float> l2_normalize(std::span<const float> v) {
    double sq = 0.0;
    for (float x : v) sq += double(x) * double(x);
    std::vector<float> out(v.begin(), v.end());
    if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (float& x : out) x = float(x * inv);
    }
    return out;
}

/// Per-location unit normalization of an (H, W, D) feature map.
inline TensorF32 l2_normalize_features(const TensorF32& t) {
    if (t.shape.size() != 3)
        throw DimensionMismatch("feature map must be (H, W, D)");
    TensorF32 out = t;
    const std::size_t d = t.shape[2];
    const std::size_t cells = t.shape[0] * t.shape[1];
    for (std::size_t i = 0; i < cells; ++i) {
        float* p = out.data.data() + i * d;
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sq += double(p[c]) * double(p[c]);
        if (sq > 0.0) {
            const double inv = 1.0 / std::sqrt(sq);
            for (std::size_t c = 0; c < d; ++c) p[c] = float(p[c] * inv);
        }
    }
    return out;
}

/// Dot product of each (already normalized) location feature with the
/// (already normalized) sentence vector; result clamped to [-1, 1].
inline CorrelationMap correlation_level(const TensorF32& features,
                                        std::span<const float> sentence) {
    if (features.shape.size() != 3)
        throw DimensionMismatch("feature map must be (H, W, D)");
    if (features.shape[2] != sentence.size())
        throw DimensionMismatch("sentence dim differs from feature dim");
    const std::size_t d = sentence.size();
    CorrelationMap m(int(features.shape[1]), int(features.shape[0]));
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const float* p = features.data.data() + i * d;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            dot += double(p[c]) * double(sentence[c]);
        m.values[i] = float(std::clamp(dot, -1.0, 1.0));
    }
    return m;
}

/// Affine map [-1, 1] -> [0, 1]; inputs may overshoot by 1e-6 and clamp,
/// anything further out is an error.
inline CorrelationMap rescale_unit(const CorrelationMap& m) {
    CorrelationMap out(m.width, m.height);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const float v = m.values[i];
        if (!(v >= -1.0f - 1e-6f && v <= 1.0f + 1e-6f))
            throw OutOfRange("correlation value outside [-1, 1]");
        out.values[i] = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
    }
    return out;
}

/// Pixelwise mean of per-level maps already brought to a common size.
inline CorrelationMap integrate_levels(std::span<const CorrelationMap> maps) {
    return pixelwise_mean(maps);
}

/// Embeddings to final map: pool the text, unit-normalize both sides,
/// correlate each level, rescale to [0, 1], upsample every level to the
/// output size, average.
inline CorrelationMap hmsa_forward(const FlatImageEmbedding& image,
                                   const TextEmbeddingSequence& text,
                                   int out_width, int out_height,
                                   PoolMode mode = PoolMode::Average) {
    if (image.dim != text.dim)
        throw DimensionMismatch("image and text embedding dims differ");
    if (out_width < 1 || out_height < 1)
        throw OutOfRange("output dims must be >= 1");
    const std::vector<float> sentence = l2_normalize(pool_text(text, mode));
    const MultiscaleFeatureSet levels = unflatten(image);

    std::vector<CorrelationMap> upsampled;
    upsampled.reserve(levels.levels.size());
    for (const auto& level : levels.levels) {
        const TensorF32 g = l2_normalize_features(level);
        const CorrelationMap c = rescale_unit(correlation_level(g, sentence));
        upsampled.push_back(bilinear_upsample(c, out_width, out_height));
    }
    return integrate_levels(upsampled);
}

/// Sum of absolute differences, unreduced.
inline double l1_loss(const CorrelationMap& pred, const CorrelationMap& target) {
    if (!pred.same_dims(target))
        throw DimensionMismatch("loss operands differ in shape");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i)
        acc += std::abs(double(pred.values[i]) - double(target.values[i]));
    return acc;
}

inline double l1_loss_mean(const CorrelationMap& pred, const CorrelationMap& target) {
    return l1_loss(pred, target) / double(pred.values.size());
}

} // namespace xemap
