#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xemap/errors.hpp"
#include "xemap/tensor.hpp"

namespace xemap {

/// S x D token embedding matrix, row-major.
struct TextEmbeddingSequence {
    std::size_t length = 0; // S
    std::size_t dim = 0;    // D
    std::vector<float> data;

    TextEmbeddingSequence() = default;
    TextEmbeddingSequence(std::size_t s, std::size_t d)
        : length(s), dim(d), data(s * d, 0.0f) {}

    float* row(std::size_t i) { return data.data() + i * dim; }
    const float* row(std::size_t i) const { return data.data() + i * dim; }
};

/// Concatenated multiscale image embedding: P x D rows, P = sum of H_l * W_l,
/// levels in order, row-major within a level.
struct FlatImageEmbedding {
    std::size_t dim = 0;
    std::vector<std::array<int, 2>> level_dims; // (H_l, W_l)
    std::vector<float> data;

    std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
    float* row(std::size_t i) { return data.data() + i * dim; }
    const float* row(std::size_t i) const { return data.data() + i * dim; }

    void validate() const {
        std::size_t p = 0;
        for (auto [h, w] : level_dims) {
            if (h < 1 || w < 1)
                throw DimensionMismatch("level dims must be >= 1");
            p += std::size_t(h) * std::size_t(w);
        }
        if (p * dim != data.size())
            throw DimensionMismatch("P != sum of level H*W");
    }
};

/// L per-level feature maps, each shaped (H_l, W_l, D), finest first.
struct MultiscaleFeatureSet {
    std::vector<TensorF32> levels;

    std::size_t dim() const {
        return levels.empty() ? 0 : levels.front().shape[2];
    }

    void validate(bool require_decreasing = true) const {
        if (levels.empty())
            throw EmptyInput("feature set needs at least one level");
        std::size_t d = 0;
        std::size_t prev_h = 0, prev_w = 0;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const auto& t = levels[l];
            if (t.shape.size() != 3)
                throw DimensionMismatch("feature level must be (H, W, D)");
            t.validate();
            if (l == 0) {
                d = t.shape[2];
            } else {
                if (t.shape[2] != d)
                    throw DimensionMismatch("levels disagree on embedding dim");
                if (require_decreasing &&
                    (t.shape[0] >= prev_h || t.shape[1] >= prev_w))
                    throw DimensionMismatch("levels must be ordered finest-first");
            }
            prev_h = t.shape[0];
            prev_w = t.shape[1];
        }
    }
};

/// Projection matrices of one multi-head attention sub-module, each D x D.
struct MhaParams {
    TensorF32 wq, wk, wv, wo;
};

/// Deformable attention parameters: value/output projections plus the offset
/// and weight heads. w_offset is D x (n_h*L*K*2), w_weight is D x (n_h*L*K).
struct DeformableParams {
    TensorF32 w_value;
    TensorF32 w_offset;
    TensorF32 w_weight;
    TensorF32 w_output;
    int points = 4; // K sampling points per head per level
};

struct FusionBlockParams {
    MhaParams image_to_text; // queries = image, keys/values = text
    MhaParams text_to_image; // queries = text, keys/values = image
    MhaParams text_self;
    DeformableParams deform;
};

struct FusionParams {
    int n_heads = 4;
    std::vector<FusionBlockParams> blocks;
};

enum class PoolMode { Average, Max, First };

inline PoolMode pool_mode_from_string(const std::string& s) {
    if (s == "avg" || s == "average") return PoolMode::Average;
    if (s == "max") return PoolMode::Max;
    if (s == "first") return PoolMode::First;
    throw SchemaError("unknown pool mode \"" + s + "\"");
}

namespace detail {

// y[nq x out] = x[nq x in] * W[in x out], row-major
inline void matmul(const float* x, std::size_t nq, std::size_t in,
                   const TensorF32& w, float* y) {
    if (w.shape.size() != 2 || w.shape[0] != in)
        throw DimensionMismatch("projection matrix shape mismatch");
    std::size_t out = w.shape[1];
    for (std::size_t i = 0; i < nq; ++i) {
        const float* xi = x + i * in;
        for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t k = 0; k < in; ++k)
                acc += double(xi[k]) * double(w.data[k * out + o]);
            y[i * out + o] = float(acc);
        }
    }
}

inline void softmax_inplace(std::span<float> logits) {
    float mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (float& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (float& v : logits) v = float(v / sum);
}

} // namespace detail

/// Scaled dot-product attention core: softmax(Q K^T / sqrt(d)) V with
/// row-wise max-subtracted softmax.
inline void attention_kernel(const float* q, std::size_t n_q,
                             const float* k, std::size_t n_k, std::size_t d,
                             const float* v, std::size_t d_v, float* out) {
    if (d == 0 || n_k == 0)
        throw DimensionMismatch("attention needs d >= 1 and n_k >= 1");
    const double scale = 1.0 / std::sqrt(double(d));
    std::vector<float> weights(n_k);
    for (std::size_t i = 0; i < n_q; ++i) {
        const float* qi = q + i * d;
        for (std::size_t j = 0; j < n_k; ++j) {
            const float* kj = k + j * d;
            double dot = 0.0;
            for (std::size_t t = 0; t < d; ++t)
                dot += double(qi[t]) * double(kj[t]);
            weights[j] = float(dot * scale);
        }
        detail::softmax_inplace(weights);
        float* oi = out + i * d_v;
        for (std::size_t c = 0; c < d_v; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_k; ++j)
                acc += double(weights[j]) * double(v[j * d_v + c]);
            oi[c] = float(acc);
        }
    }
}

inline TensorF32 attention_kernel(const TensorF32& q, const TensorF32& k, const TensorF32& v) {
    if (q.shape.size() != 2 || k.shape.size() != 2 || v.shape.size() != 2)
        throw DimensionMismatch("attention operands must be 2-D");
    if (q.shape[1] != k.shape[1] || k.shape[0] != v.shape[0])
        throw DimensionMismatch("attention operand shapes disagree");
    TensorF32 out = TensorF32::zeros({q.shape[0], v.shape[1]});
    attention_kernel(q.data.data(), q.shape[0], k.data.data(), k.shape[0], q.shape[1],
                     v.data.data(), v.shape[1], out.data.data());
    return out;
}

/// Multi-head attention without the residual: project, split into n_h heads,
/// attend per head, concat, output-project.
inline std::vector<float> multi_head_attention(const float* q_in, std::size_t n_q,
                                               const float* kv_in, std::size_t n_k,
                                               std::size_t d, const MhaParams& p, int n_h) {
    if (n_h < 1 || d % std::size_t(n_h) != 0)
        throw DimensionMismatch("head count must divide embedding dim");
    const std::size_t dh = d / std::size_t(n_h);

    std::vector<float> q(n_q * d), k(n_k * d), v(n_k * d);
    detail::matmul(q_in, n_q, d, p.wq, q.data());
    detail::matmul(kv_in, n_k, d, p.wk, k.data());
    detail::matmul(kv_in, n_k, d, p.wv, v.data());

    std::vector<float> qh(n_q * dh), kh(n_k * dh), vh(n_k * dh), oh(n_q * dh);
    std::vector<float> concat(n_q * d);
    for (int h = 0; h < n_h; ++h) {
        const std::size_t c0 = std::size_t(h) * dh;
        for (std::size_t i = 0; i < n_q; ++i)
            std::copy_n(q.data() + i * d + c0, dh, qh.data() + i * dh);
        for (std::size_t j = 0; j < n_k; ++j) {
            std::copy_n(k.data() + j * d + c0, dh, kh.data() + j * dh);
            std::copy_n(v.data() + j * d + c0, dh, vh.data() + j * dh);
        }
        attention_kernel(qh.data(), n_q, kh.data(), n_k, dh, vh.data(), dh, oh.data());
        for (std::size_t i = 0; i < n_q; ++i)
            std::copy_n(oh.data() + i * dh, dh, concat.data() + i * d + c0);
    }
    std::vector<float> out(n_q * d);
    detail::matmul(concat.data(), n_q, d, p.wo, out.data());
    return out;
}

/// Bidirectional cross-attention with residuals; both directions read the
/// original inputs.
inline std::pair<TextEmbeddingSequence, FlatImageEmbedding>
cross_attention_block(const TextEmbeddingSequence& text, const FlatImageEmbedding& image,
                      const MhaParams& image_to_text, const MhaParams& text_to_image,
                      int n_h) {
    if (text.dim != image.dim)
        throw DimensionMismatch("text and image embedding dims differ");
    const std::size_t d = text.dim;
    const std::size_t p = image.rows();

    auto img_upd = multi_head_attention(image.data.data(), p, text.data.data(),
                                        text.length, d, image_to_text, n_h);
    auto txt_upd = multi_head_attention(text.data.data(), text.length, image.data.data(),
                                        p, d, text_to_image, n_h);

    TextEmbeddingSequence text_out = text;
    for (std::size_t i = 0; i < text_out.data.size(); ++i)
        text_out.data[i] += txt_upd[i];
    FlatImageEmbedding image_out = image;
    for (std::size_t i = 0; i < image_out.data.size(); ++i)
        image_out.data[i] += img_upd[i];
    return {std::move(text_out), std::move(image_out)};
}

inline TextEmbeddingSequence text_self_attention(const TextEmbeddingSequence& text,
                                                 const MhaParams& p, int n_h) {
    auto upd = multi_head_attention(text.data.data(), text.length, text.data.data(),
                                    text.length, text.dim, p, n_h);
    TextEmbeddingSequence out = text;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += upd[i];
    return out;
}

namespace detail {

// Bilinear read with zero padding outside [0,W)x[0,H); (x, y) in cell-index
// units so an integer coordinate hits a cell center exactly.
inline void bilinear_sample_zero(const float* level, int h, int w, std::size_t d,
                                 std::size_t col0, std::size_t dh,
                                 double x, double y, double weight, double* acc) {
    int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    double fx = x - x0, fy = y - y0;
    const double wgt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int c = 0; c < 4; ++c) {
        if (xs[c] < 0 || ys[c] < 0 || xs[c] >= w || ys[c] >= h || wgt[c] == 0.0)
            continue;
        const float* cell = level + (std::size_t(ys[c]) * w + xs[c]) * d + col0;
        for (std::size_t t = 0; t < dh; ++t)
            acc[t] += weight * wgt[c] * double(cell[t]);
    }
}

} // namespace detail

/// Deformable self-attention over the multiscale image embedding. Each query
/// takes its own cell center as reference point (normalized coordinates),
/// samples K offset points per head per level from the value-projected
/// features (bilinear, zero outside), combines them with softmax weights over
/// levels x K, output-projects, and adds the residual.
inline FlatImageEmbedding deformable_self_attention(const FlatImageEmbedding& image,
                                                    const DeformableParams& p, int n_h) {
    image.validate();
    const std::size_t d = image.dim;
    const std::size_t rows = image.rows();
    const std::size_t levels = image.level_dims.size();
    const int k_points = p.points;
    if (n_h < 1 || d % std::size_t(n_h) != 0)
        throw DimensionMismatch("head count must divide embedding dim");
    if (k_points < 1)
        throw DimensionMismatch("sampling points must be >= 1");
    const std::size_t dh = d / std::size_t(n_h);
    const std::size_t slots = std::size_t(n_h) * levels * std::size_t(k_points);
    if (p.w_offset.shape != std::vector<std::size_t>{d, slots * 2})
        throw DimensionMismatch("w_offset must be D x (heads*levels*K*2)");
    if (p.w_weight.shape != std::vector<std::size_t>{d, slots})
        throw DimensionMismatch("w_weight must be D x (heads*levels*K)");

    std::vector<float> value(rows * d);
    detail::matmul(image.data.data(), rows, d, p.w_value, value.data());

    std::vector<std::size_t> level_start(levels + 1, 0);
    for (std::size_t l = 0; l < levels; ++l)
        level_start[l + 1] = level_start[l] +
                             std::size_t(image.level_dims[l][0]) * image.level_dims[l][1];

    std::vector<float> offsets(slots * 2), logits(slots);
    std::vector<float> sampled(d);
    std::vector<double> acc(dh);
    std::vector<float> update(rows * d);

    std::size_t q_level = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        while (i >= level_start[q_level + 1]) ++q_level;
        const int qh_ = image.level_dims[q_level][0];
        const int qw_ = image.level_dims[q_level][1];
        const std::size_t in_level = i - level_start[q_level];
        const double ref_x = (double(in_level % std::size_t(qw_)) + 0.5) / qw_;
        const double ref_y = (double(in_level / std::size_t(qw_)) + 0.5) / qh_;

        detail::matmul(image.row(i), 1, d, p.w_offset, offsets.data());
        detail::matmul(image.row(i), 1, d, p.w_weight, logits.data());

        for (int h = 0; h < n_h; ++h) {
            std::span<float> head_logits(logits.data() + std::size_t(h) * levels * k_points,
                                         levels * std::size_t(k_points));
            detail::softmax_inplace(head_logits);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t l = 0; l < levels; ++l) {
                const int lh = image.level_dims[l][0];
                const int lw = image.level_dims[l][1];
                const float* level_vals = value.data() + level_start[l] * d;
                for (int k = 0; k < k_points; ++k) {
                    std::size_t slot = (std::size_t(h) * levels + l) * k_points + k;
                    double sx = ref_x * lw - 0.5 + offsets[slot * 2];
                    double sy = ref_y * lh - 0.5 + offsets[slot * 2 + 1];
                    detail::bilinear_sample_zero(level_vals, lh, lw, d,
                                                 std::size_t(h) * dh, dh, sx, sy,
                                                 head_logits[l * k_points + k], acc.data());
                }
            }
            for (std::size_t t = 0; t < dh; ++t)
                sampled[std::size_t(h) * dh + t] = float(acc[t]);
        }
        detail::matmul(sampled.data(), 1, d, p.w_output, update.data() + i * d);
    }

    FlatImageEmbedding out = image;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += update[i];
    return out;
}

/// Column-wise average / max / first-row pooling of the token sequence.
inline std::vector<float> pool_text(const TextEmbeddingSequence& text, PoolMode mode) {
    if (text.length == 0)
        throw EmptyInput("pool_text needs at least one token");
    std::vector<float> out(text.dim);
    switch (mode) {
    case PoolMode::First:
        std::copy_n(text.row(0), text.dim, out.begin());
        break;
    case PoolMode::Max:
        std::copy_n(text.row(0), text.dim, out.begin());
        for (std::size_t i = 1; i < text.length; ++i)
            for (std::size_t c = 0; c < text.dim; ++c)
                out[c] = std::max(out[c], text.row(i)[c]);
        break;
    case PoolMode::Average:
        for (std::size_t c = 0; c < text.dim; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < text.length; ++i)
                acc += text.row(i)[c];
            out[c] = float(acc / double(text.length));
        }
        break;
    }
    return out;
}

/// Concatenate levels (in order, row-major within a level) into P x D rows.
inline FlatImageEmbedding flatten_multiscale(const MultiscaleFeatureSet& f) {
    f.validate(false);
    FlatImageEmbedding e;
    e.dim = f.dim();
    for (const auto& level : f.levels) {
        e.level_dims.push_back({int(level.shape[0]), int(level.shape[1])});
        e.data.insert(e.data.end(), level.data.begin(), level.data.end());
    }
    return e;
}

/// Inverse of flatten_multiscale.
inline MultiscaleFeatureSet unflatten(const FlatImageEmbedding& e) {
    e.validate();
    MultiscaleFeatureSet f;
    std::size_t off = 0;
    for (auto [h, w] : e.level_dims) {
        std::size_t n = std::size_t(h) * std::size_t(w) * e.dim;
        TensorF32 t({std::size_t(h), std::size_t(w), e.dim},
                    std::vector<float>(e.data.begin() + off, e.data.begin() + off + n));
        f.levels.push_back(std::move(t));
        off += n;
    }
    return f;
}

/// Full fusion pass: flatten, then per block cross-attention, deformable
/// image self-attention, and text self-attention. With no blocks this is the
/// identity on (text, flattened features).
inline std::pair<TextEmbeddingSequence, FlatImageEmbedding>
fusion_forward(const TextEmbeddingSequence& text, const MultiscaleFeatureSet& features,
               const FusionParams& params) {
    if (features.dim() != text.dim)
        throw DimensionMismatch("text and feature embedding dims differ");
    TextEmbeddingSequence t = text;
    FlatImageEmbedding img = flatten_multiscale(features);
    for (const auto& block : params.blocks) {
        auto [t2, img2] = cross_attention_block(t, img, block.image_to_text,
                                                block.text_to_image, params.n_heads);
        img = deformable_self_attention(img2, block.deform, params.n_heads);
        t = text_self_attention(t2, block.text_self, params.n_heads);
    }
    return {std::move(t), std::move(img)};
}

} // namespace xemap
